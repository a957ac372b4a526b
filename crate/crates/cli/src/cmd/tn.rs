use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Subcommand};
use rankone_core::mat::Mat2;
use rankone_core::tn::*;
use serde::Serialize;

use super::{emit, invalid, parse_list};
use crate::config::RunConfig;
use crate::output::{Sink, SCHEMA_VERSION};
use crate::Outcome;

#[derive(Subcommand, Debug)]
pub enum TnCmd {
    /// Search for a T_N certificate.
    Check(InputArgs),
    /// Roots μ > 1 of det A^{σ,μ}, and α, β, μ* for N = 5.
    Mu(InputArgs),
    /// Inner points P_k, legs C_i and κ_i of a certificate.
    Inner(InputArgs),
    /// Large-T5 test over three orderings.
    LargeT5(LargeArgs),
    /// Bisection threshold of the four-atom family.
    Threshold,
}

#[derive(Args, Debug)]
pub struct InputArgs {
    /// Built-in family: t4 or t5.
    #[arg(long, default_value = "t4")]
    family: String,
    #[arg(long, default_value_t = 3.0)]
    c: f64,
    /// One-based cyclic order, e.g. 1,2,3,5,4.
    #[arg(long)]
    sigma: Option<String>,
    /// JSON file {"x": [[[a,b],[c,d]], ...], "sigma": [1,2,...]}; overrides --family.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 1e4)]
    mu_max: f64,
}

#[derive(Args, Debug)]
pub struct LargeArgs {
    #[arg(long, default_value_t = 3.0)]
    c: f64,
    /// JSON file with five matrices {"x": [...]}; overrides --c.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Three one-based orders separated by ';', e.g. "1,2,3,5,4;1,2,4,5,3;1,2,5,3,4".
    #[arg(long)]
    sigmas: Option<String>,
}

pub fn family(name: &str, c: f64) -> Result<TnInput> {
    Ok(match name {
        "t4" => t4_family(c)?,
        "t5" => t5_family(c)?,
        _ => return Err(invalid(format!("unknown T_N family '{name}' (t4, t5)"))),
    })
}

fn load_input(a: &InputArgs, sink: &mut Sink) -> Result<TnInput> {
    let inp = match &a.input {
        Some(p) => serde_json::from_str::<TnInput>(&sink.read_input(p)?).map_err(rankone_core::Error::from)?,
        None => family(&a.family, a.c)?,
    };
    match &a.sigma {
        Some(s) => Ok(inp.with_sigma(perm_from_one_based(&parse_list(s)?)?)?),
        None => Ok(inp),
    }
}

fn opts(a: &InputArgs, cfg: &RunConfig) -> CertifyOptions {
    CertifyOptions { mu_max: a.mu_max, tol: cfg.tolerances.algebraic, ..CertifyOptions::default() }
}

#[derive(Serialize)]
struct CheckReport<'a> {
    schema_version: u32,
    verdict: bool,
    input: &'a TnInput,
    certificate: Option<&'a TnCertificate>,
}

#[derive(Serialize)]
struct MuReport {
    schema_version: u32,
    roots: Vec<f64>,
    alpha_beta: Option<AlphaBeta>,
    mu_star: Option<MuStar>,
}

#[derive(Serialize)]
struct InnerReport {
    schema_version: u32,
    mu: f64,
    base: Mat2,
    inner_points: Vec<Mat2>,
    legs: Vec<Leg>,
    rho: f64,
    residuals: CertificateResiduals,
}

#[derive(Serialize)]
struct ThresholdReport {
    schema_version: u32,
    threshold: f64,
    display: String,
    exact: f64,
    abs_error: f64,
}

pub fn run(cmd: TnCmd, cfg: &RunConfig, sink: &mut Sink) -> Result<Outcome> {
    match cmd {
        TnCmd::Check(a) => {
            let inp = load_input(&a, sink)?;
            let cert = certify_with(&inp, &opts(&a, cfg));
            let r = CheckReport { schema_version: SCHEMA_VERSION, verdict: cert.is_some(), input: &inp, certificate: cert.as_ref() };
            emit(sink, "tn_check.json", &r)?;
            Ok(if cert.is_some() { Outcome::Ok } else { Outcome::Negative })
        }
        TnCmd::Mu(a) => {
            let inp = load_input(&a, sink)?;
            let five = inp.len() == 5;
            let r = MuReport {
                schema_version: SCHEMA_VERSION,
                roots: mu_roots_scan(&inp, &opts(&a, cfg)),
                alpha_beta: if five { Some(t5_alpha_beta(&inp)?) } else { None },
                mu_star: if five { t5_mu_star(&inp) } else { None },
            };
            emit(sink, "tn_mu.json", &r)?;
            Ok(Outcome::Ok)
        }
        TnCmd::Inner(a) => {
            let inp = load_input(&a, sink)?;
            let Some(cert) = certify_with(&inp, &opts(&a, cfg)) else {
                emit(sink, "tn_inner.json", &CheckReport { schema_version: SCHEMA_VERSION, verdict: false, input: &inp, certificate: None })?;
                return Ok(Outcome::Negative);
            };
            let r = InnerReport {
                schema_version: SCHEMA_VERSION,
                mu: cert.mu,
                base: cert.base,
                inner_points: cert.inner_points.clone(),
                legs: cert.legs.clone(),
                rho: cert.rho(),
                residuals: cert.residuals,
            };
            emit(sink, "tn_inner.json", &r)?;
            sink.csv("tn_inner.csv", |buf| {
                use std::io::Write;
                writeln!(buf, "k,p11,p12,p21,p22,c11,c12,c21,c22,kappa")?;
                for (k, p) in cert.inner_points.iter().enumerate() {
                    let pos = cert.input.position(k);
                    let leg = &cert.legs[pos];
                    let (pe, ce) = (p.entries(), leg.c.entries());
                    writeln!(
                        buf,
                        "{},{},{},{},{},{},{},{},{},{}",
                        k + 1, pe[0], pe[1], pe[2], pe[3], ce[0], ce[1], ce[2], ce[3], leg.kappa
                    )?;
                }
                Ok(())
            })?;
            Ok(Outcome::Ok)
        }
        TnCmd::LargeT5(a) => {
            let x = match &a.input {
                Some(p) => {
                    #[derive(serde::Deserialize)]
                    struct Five {
                        x: Vec<Mat2>,
                    }
                    serde_json::from_str::<Five>(&sink.read_input(p)?).map_err(rankone_core::Error::from)?.x
                }
                None => t5_family(a.c)?.x().to_vec(),
            };
            let sigmas = match &a.sigmas {
                Some(s) => s
                    .split(';')
                    .map(|p| perm_from_one_based(&parse_list(p)?).map_err(anyhow::Error::from))
                    .collect::<Result<Vec<_>>>()?,
                None => t5_family_sigmas().to_vec(),
            };
            let r = is_large_t5(&x, &sigmas)?;
            emit(sink, "tn_large_t5.json", &r)?;
            Ok(if r.verdict { Outcome::Ok } else { Outcome::Negative })
        }
        TnCmd::Threshold => {
            let t = t4_threshold();
            let exact = 1.0 + std::f64::consts::SQRT_2;
            let r = ThresholdReport {
                schema_version: SCHEMA_VERSION,
                threshold: t,
                display: format!("{t:.6}"),
                exact,
                abs_error: (t - exact).abs(),
            };
            emit(sink, "tn_threshold.json", &r)?;
            Ok(Outcome::Ok)
        }
    }
}
