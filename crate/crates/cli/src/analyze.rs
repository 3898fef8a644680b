//! `emtc analyze`: wave-velocity curves, the spectral energy-ratio table and
//! the frequency-dependence error model, emitted as CSV for plotting.

use std::path::PathBuf;

use clap::{Args, Subcommand};

use emtc_core::analysis;
use emtc_core::line::{self, C0};

use crate::{load_network_for_analysis, units, CliError};

#[derive(Args)]
pub struct AnalyzeArgs {
    #[command(subcommand)]
    what: AnalyzeCommand,
}

#[derive(Subcommand)]
enum AnalyzeCommand {
    /// Phase-velocity curves of the single-wire line over lossy ground.
    Velocity {
        #[arg(long)]
        network: PathBuf,
        /// Ground resistivities in Ω·m (unit carried by the flag name).
        #[arg(long = "rho-ohm-m", value_delimiter = ',', default_value = "10,100,1000")]
        rho: Vec<f64>,
        #[arg(long, default_value = "1kHz", value_parser = units::parse_frequency)]
        fmin: f64,
        #[arg(long, default_value = "1MHz", value_parser = units::parse_frequency)]
        fmax: f64,
        #[arg(long, default_value_t = 60)]
        points: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fraction of terminal-spectrum energy below a multiple of the first
    /// transfer maximum, per fault distance.
    EnergyRatio {
        #[arg(long)]
        network: PathBuf,
        /// Fault distances, e.g. 10km,20km,50km,100km.
        #[arg(long, value_delimiter = ',', value_parser = units::parse_length)]
        distances: Vec<f64>,
        /// Multiples of the first transfer maximum.
        #[arg(long, value_delimiter = ',', default_value = "10,15,20,25")]
        multiples: Vec<f64>,
        /// Termination impedance behind the measurement point.
        #[arg(long, default_value = "10kohm", value_parser = units::parse_resistance)]
        z0: f64,
        /// Sample interval fixing the integration grid and Nyquist limit.
        #[arg(long, default_value = "0.1us", value_parser = units::parse_time)]
        dt: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-harmonic location-error prediction from the fitted velocity law.
    ErrorModel {
        #[arg(long)]
        network: PathBuf,
        /// Fault distance the Δx_k table is evaluated at.
        #[arg(long, value_parser = units::parse_length)]
        distance: f64,
        /// Ground resistivity in Ω·m; defaults to the config value.
        #[arg(long = "rho-ohm-m")]
        rho: Option<f64>,
        #[arg(long, default_value = "10kHz", value_parser = units::parse_frequency)]
        fmin: f64,
        #[arg(long, default_value = "1MHz", value_parser = units::parse_frequency)]
        fmax: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

pub fn cmd_analyze(args: AnalyzeArgs) -> Result<(), CliError> {
    match args.what {
        AnalyzeCommand::Velocity { network, rho, fmin, fmax, points, out } => {
            let net = load_network_for_analysis(&network)?;
            let mut curves = Vec::new();
            for &r in &rho {
                if !(r > 0.0) {
                    return Err(CliError::Usage(format!("resistivity must be positive, got {r}")));
                }
                let ground = line::GroundModel {
                    resistivity_ohm_m: r,
                    relative_permittivity: net.ground.relative_permittivity,
                    perfect: false,
                };
                let model = line::pul_frequency_dependent(&net.geometry, &ground)
                    .map_err(CliError::runtime)?;
                curves.push(
                    line::velocity_curve(&model, fmin, fmax, points).map_err(CliError::runtime)?,
                );
            }
            let mut csv = String::from("f_hz");
            for &r in &rho {
                csv.push_str(&format!(",v_mps_rho{r}"));
            }
            csv.push('\n');
            for i in 0..curves[0].len() {
                csv.push_str(&format!("{}", curves[0][i].0));
                for curve in &curves {
                    csv.push_str(&format!(",{}", curve[i].1));
                }
                csv.push('\n');
            }
            std::fs::write(&out, csv).map_err(CliError::runtime)?;
            println!("velocity curves for rho = {rho:?} -> {}", out.display());
        }
        AnalyzeCommand::EnergyRatio { network, distances, multiples, z0, dt, out } => {
            let net = load_network_for_analysis(&network)?;
            let model = line::pul_frequency_dependent(&net.geometry, &net.ground)
                .map_err(CliError::runtime)?;
            let n = ((5e-3 / dt).round() as usize).next_power_of_two();
            let df = 1.0 / (n as f64 * dt);
            let f_nyquist = 0.5 / dt;
            let mut csv = String::from("x_f_km");
            for m in &multiples {
                csv.push_str(&format!(",ratio_at_{m}f0"));
            }
            csv.push('\n');
            for &x in &distances {
                csv.push_str(&format!("{}", x / 1e3));
                for &m in &multiples {
                    let ratio = analysis::energy_ratio(&model, z0, x, m, df, f_nyquist)
                        .map_err(CliError::runtime)?;
                    csv.push_str(&format!(",{ratio:.4}"));
                }
                csv.push('\n');
            }
            std::fs::write(&out, csv).map_err(CliError::runtime)?;
            println!("energy ratios for {} distances -> {}", distances.len(), out.display());
        }
        AnalyzeCommand::ErrorModel { network, distance, rho, fmin, fmax, out } => {
            let net = load_network_for_analysis(&network)?;
            let ground = line::GroundModel {
                resistivity_ohm_m: rho.unwrap_or(net.ground.resistivity_ohm_m),
                relative_permittivity: net.ground.relative_permittivity,
                perfect: false,
            };
            let model =
                line::pul_frequency_dependent(&net.geometry, &ground).map_err(CliError::runtime)?;
            let curve =
                line::velocity_curve(&model, fmin, fmax, 40).map_err(CliError::runtime)?;
            let f0_fit = (fmin * fmax).sqrt();
            let fit = line::fit_log_velocity(&curve, f0_fit).map_err(CliError::runtime)?;
            let error_model = analysis::ErrorModel::build(fit, C0, distance, None)
                .map_err(CliError::runtime)?;
            let mut csv = format!(
                "# v_c={} v_f0={} f0={} r_squared={}\n# x_f_m={distance} v_fi={C0}\n\
                 k,f_k_hz,delta_x_m,delta_x_over_x_f\n",
                fit.v_c, fit.v_f0, fit.f0, fit.r_squared
            );
            for (k, ratio) in error_model.delta_ratio.iter().enumerate() {
                let f_k = (2 * k + 1) as f64 * C0 / (4.0 * distance);
                csv.push_str(&format!("{k},{f_k},{},{ratio}\n", ratio * distance));
            }
            std::fs::write(&out, csv).map_err(CliError::runtime)?;
            println!(
                "error model at x_f = {} m: delta_x0/x_f = {:.4} (fit r² = {:.3}) -> {}",
                distance,
                error_model.delta_ratio[0],
                fit.r_squared,
                out.display()
            );
        }
    }
    Ok(())
}
