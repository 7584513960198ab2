use std::path::Path;

use hardylab::atoms::{
    atom_from_json, atom_to_json, build_counterexample_atom, moment_order, validate_atom, validate_product_atom, AtomJson,
    AtomReport, Lq, ProductAtom,
};
use hardylab::bases::{eval_1d, eval_deriv_1d, Family, System1D, SystemSpec};
use hardylab::estimates::{self, EstimateCheck};
use hardylab::hardy::{admissible_exponent, gamma_for, hardy_sum, theorem_exponent, HardyExponentParams, HardySumRecord};
use hardylab::kernels::{self, SpectralTruncation};
use hardylab::quadrature::CoefficientCache;
use hardylab::rational::{self, q, Q};
use hardylab::sharpness::{run_sharpness, SharpnessParams};
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::*;
use crate::error::{CliError, EXIT_CHECK_FAILED, EXIT_OK, EXIT_TOLERANCE};
use crate::table::{Cell, Table};

pub struct Plan {
    pub name: &'static str,
    pub params: Value,
    pub default_format: Format,
}

pub struct Outcome {
    pub json: Value,
    pub table: Table,
    pub exit_code: i32,
}

fn params_of<T: Serialize>(args: &T, tol: Option<f64>) -> Value {
    let mut v = serde_json::to_value(args).expect("arguments serialize");
    if let (Some(t), Value::Object(m)) = (tol, &mut v) {
        m.insert("tol".into(), json!(t));
    }
    v
}

pub fn plan(cmd: &Command, tol: f64) -> Plan {
    let (name, params, default_format) = match cmd {
        Command::Basis(a) => ("basis", params_of(a, None), Format::Csv),
        Command::Kernel(a) => ("kernel", params_of(a, None), Format::Csv),
        Command::Atom(AtomCommand::Build(a)) => ("atom build", params_of(a, None), Format::Json),
        Command::Atom(AtomCommand::Validate(a)) => {
            // the record must follow the file's content, not its name
            let mut p = params_of(a, None);
            let content = std::fs::read_to_string(&a.file).unwrap_or_default();
            p["file"] = json!(content);
            ("atom validate", p, Format::Json)
        }
        Command::Hardy(HardyCommand::Exponent(a)) => ("hardy exponent", params_of(a, None), Format::Json),
        Command::Hardy(HardyCommand::Sum(a)) => ("hardy sum", params_of(a, Some(tol)), Format::Json),
        Command::Sharpness(SharpnessCommand::Run(a)) => ("sharpness run", params_of(a, Some(tol)), Format::Json),
        Command::Estimates(a) => ("estimates", params_of(a, None), Format::Json),
    };
    Plan { name, params, default_format }
}

pub fn execute(cmd: &Command, tol: f64) -> Result<Outcome, CliError> {
    match cmd {
        Command::Basis(a) => basis(a),
        Command::Kernel(a) => kernel(a),
        Command::Atom(AtomCommand::Build(a)) => atom_build(a),
        Command::Atom(AtomCommand::Validate(a)) => atom_validate(a),
        Command::Hardy(HardyCommand::Exponent(a)) => hardy_exponent(a),
        Command::Hardy(HardyCommand::Sum(a)) => hardy_sum_cmd(a, tol),
        Command::Sharpness(SharpnessCommand::Run(a)) => sharpness(a, tol),
        Command::Estimates(a) => estimates_cmd(a),
    }
}

fn usage<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Usage(msg.into()))
}

fn parse_q(flag: &str, s: &str) -> Result<Q, CliError> {
    rational::parse(s).map_err(|_| CliError::Usage(format!("--{flag}: not a number or num/den: {s:?}")))
}

pub fn build_spec(a: &SystemArgs) -> Result<SystemSpec, CliError> {
    let f = a.system;
    let (needs, forbids): (&[&str], &[&str]) = match f {
        Family::LaguerreStd | Family::LaguerreHermite => (&["alpha"], &["beta", "lambda"]),
        Family::GeneralizedHermite => (&["lambda"], &["alpha", "beta"]),
        Family::JacobiTrig => (&["alpha", "beta"], &["lambda"]),
    };
    let get = |name: &str| match name {
        "alpha" => &a.alpha,
        "beta" => &a.beta,
        _ => &a.lambda,
    };
    for n in needs {
        if get(n).is_empty() {
            return usage(format!("--{n} is required for --system {f}"));
        }
    }
    for n in forbids {
        if !get(n).is_empty() {
            return usage(format!("--{n} conflicts with --system {f}"));
        }
    }
    let d = a.d.unwrap_or_else(|| needs.iter().map(|n| get(n).len()).max().unwrap_or(1));
    if d == 0 {
        return usage("--d must be positive");
    }
    let expand = |name: &str| -> Result<Vec<f64>, CliError> {
        let v = get(name);
        match v.len() {
            0 => Ok(vec![]),
            1 => Ok(vec![v[0]; d]),
            n if n == d => Ok(v.clone()),
            n => usage(format!("--{name} has {n} values for dimension {d}")),
        }
    };
    Ok(SystemSpec::new(f, expand("alpha")?, expand("beta")?, expand("lambda")?)?)
}

fn one_d(a: &SystemArgs) -> Result<System1D, CliError> {
    let spec = build_spec(a)?;
    if spec.d != 1 {
        return usage("this command takes a one-dimensional system");
    }
    Ok(spec.coordinate(0))
}

/// One number per line; blank lines and `#` comments are skipped.
pub fn read_points(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let body = raw.split('#').next().unwrap_or("");
        let tok = body.trim();
        if tok.is_empty() {
            continue;
        }
        let col = body.find(tok).unwrap_or(0) + 1;
        match tok.parse::<f64>() {
            Ok(x) if x.is_finite() => out.push(x),
            _ => return usage(format!("{}:{}:{}: bad number {tok:?}", path.display(), i + 1, col)),
        }
    }
    Ok(out)
}

fn basis(a: &BasisArgs) -> Result<Outcome, CliError> {
    let sys = one_d(&a.system)?;
    let mut us = a.u.clone();
    if let Some(p) = &a.points {
        us.extend(read_points(p)?);
    }
    let mut table = Table::new(vec!["k", "u", "deriv", "value"]);
    let mut rows = Vec::new();
    for &k in &a.k {
        for &u in &us {
            let v = if a.deriv == 0 { eval_1d(&sys, k, u)? } else { eval_deriv_1d(&sys, k, a.deriv, u)? };
            table.push(vec![k.into(), u.into(), a.deriv.into(), v.into()]);
            rows.push(json!({ "k": k, "u": u, "value": v }));
        }
    }
    let json = json!({ "system": sys.to_string(), "deriv": a.deriv, "values": rows });
    Ok(Outcome { json, table, exit_code: EXIT_OK })
}

fn join(x: &[f64]) -> String {
    x.iter().map(|v| hardylab::atoms::format_f64(*v)).collect::<Vec<_>>().join(";")
}

fn kernel(a: &KernelArgs) -> Result<Outcome, CliError> {
    let spec = build_spec(&a.system)?;
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = if spec.d == 1 {
        a.u.iter().flat_map(|&u| a.v.iter().map(move |&v| (vec![u], vec![v]))).collect()
    } else {
        if a.u.len() != spec.d || a.v.len() != spec.d {
            return usage(format!("--u and --v must each be one point with {} coordinates", spec.d));
        }
        vec![(a.u.clone(), a.v.clone())]
    };
    let mut table = Table::new(vec!["u", "v", "value", "k_max", "tail_bound"]);
    let mut rows = Vec::new();
    for (x, y) in &pairs {
        let (value, k_max, tail) = match (a.r, a.t) {
            (_, Some(t)) => {
                let v = if a.explicit {
                    kernels::heat_kernel_explicit(&spec, t, x, y)?
                } else {
                    kernels::heat_kernel(&spec, t, x, y)?
                };
                (v, None, None)
            }
            (Some(r), None) => poisson(&spec, a, r, x, y)?,
            (None, None) => return usage("one of --r or --t is required"),
        };
        table.push(vec![
            join(x).into(),
            join(y).into(),
            value.into(),
            k_max.map_or(Cell::Text(String::new()), Cell::from),
            tail.map_or(Cell::Text(String::new()), Cell::from),
        ]);
        rows.push(json!({ "u": x, "v": y, "value": value, "k_max": k_max, "tail_bound": tail }));
    }
    let json = json!({ "system": spec, "r": a.r, "t": a.t, "method": a.method, "values": rows });
    Ok(Outcome { json, table, exit_code: EXIT_OK })
}

fn poisson(
    spec: &SystemSpec,
    a: &KernelArgs,
    r: f64,
    x: &[f64],
    y: &[f64],
) -> Result<(f64, Option<usize>, Option<f64>), CliError> {
    if spec.d > 1 {
        if a.method == KernelMethod::Spectral {
            return usage("--method spectral takes a one-dimensional system");
        }
        let trunc = a.kmax.map(SpectralTruncation::fixed);
        return Ok((kernels::kernel_tensor(spec, r, x, y, trunc.as_ref())?, None, None));
    }
    let sys = spec.coordinate(0);
    Ok(match a.method {
        KernelMethod::Auto => (kernels::kernel_1d(&sys, r, x[0], y[0])?, None, None),
        KernelMethod::Closed => (kernels::kernel_closed_1d(&sys, r, x[0], y[0])?, None, None),
        KernelMethod::Spectral => {
            let trunc = match a.kmax {
                Some(k) => SpectralTruncation::fixed(k),
                None => SpectralTruncation::for_tolerance(&sys, r, 1e-15)?,
            };
            let s = kernels::kernel_spectral(&sys, r, x[0], y[0], &trunc)?;
            (s.value, Some(s.k_max), Some(s.tail_bound))
        }
    })
}

fn delta_or_default(p: &Q, delta: &Option<String>) -> Result<Q, CliError> {
    match delta {
        Some(s) => parse_q("delta", s),
        None => Ok(q(1, 8 * (moment_order(p, 1)? as i64 + 1))),
    }
}

fn atom_table(rec: &AtomJson) -> Table {
    let mut t = Table::new(vec!["left", "right", "value"]);
    for (i, v) in rec.values.iter().enumerate() {
        t.push(vec![rec.breakpoints[i].clone().into(), rec.breakpoints[i + 1].clone().into(), v.clone().into()]);
    }
    t
}

fn atom_build(a: &AtomBuildArgs) -> Result<Outcome, CliError> {
    let p = parse_q("p", &a.p)?;
    let delta = delta_or_default(&p, &a.delta)?;
    let atom = build_counterexample_atom(&p, a.a, &delta)?;
    let rec = atom_to_json(&atom, &p, a.a, &delta);
    let table = atom_table(&rec);
    Ok(Outcome { json: serde_json::to_value(&rec).expect("atom serializes"), table, exit_code: EXIT_OK })
}

fn report_table(rep: &AtomReport) -> Table {
    let mut t = Table::new(vec!["quantity", "value"]);
    for (i, r) in rep.moment_residuals.iter().enumerate() {
        t.push(vec![format!("moment_residual_{i}").into(), (*r).into()]);
    }
    t.push(vec!["sup_norm_ratio".into(), rep.sup_norm_ratio.into()]);
    t.push(vec!["ball_slack".into(), rep.ball_slack.into()]);
    t.push(vec!["exact".into(), rep.exact.into()]);
    t.push(vec!["is_atom".into(), rep.is_atom.into()]);
    t
}

fn atom_validate(a: &AtomValidateArgs) -> Result<Outcome, CliError> {
    let text = std::fs::read_to_string(&a.file).map_err(|e| CliError::Io(format!("{}: {e}", a.file.display())))?;
    let rec: AtomJson = serde_json::from_str(&text).map_err(|e| {
        CliError::Usage(format!("{}:{}:{}: {e}", a.file.display(), e.line(), e.column()))
    })?;
    let atom = atom_from_json(&rec)?;
    let p = parse_q("p", &a.p)?;
    let lq = match a.q {
        QNorm::Two => Lq::Two,
        QNorm::Inf => Lq::Infinity,
    };
    let rep = match a.d {
        0 => return usage("--d must be positive"),
        1 => validate_atom(&atom, &p, lq)?,
        d => validate_product_atom(&ProductAtom::isotropic(atom, d), &p, lq)?,
    };
    let exit_code = if rep.is_atom { EXIT_OK } else { EXIT_CHECK_FAILED };
    Ok(Outcome { json: serde_json::to_value(&rep).expect("report serializes"), table: report_table(&rep), exit_code })
}

fn hardy_exponent(a: &HardyExponentArgs) -> Result<Outcome, CliError> {
    let p = parse_q("p", &a.p)?;
    let s = parse_q("s", &a.s)?;
    let gamma = gamma_for(a.system);
    let e = admissible_exponent(&p, &s, a.d, &gamma)?;
    let te = theorem_exponent(a.system, &p, &s, a.d)?;
    let json = json!({
        "system": a.system.name(),
        "p": rational::format(&p),
        "s": rational::format(&s),
        "d": a.d,
        "gamma": rational::format(&gamma),
        "E": rational::format(&e),
        "E_value": rational::to_f64(&e),
        "theorem_E": rational::format(&te),
    });
    let mut table = Table::new(vec!["system", "p", "s", "d", "gamma", "E", "E_value"]);
    table.push(vec![
        a.system.name().into(),
        rational::format(&p).into(),
        rational::format(&s).into(),
        a.d.into(),
        rational::format(&gamma).into(),
        rational::format(&e).into(),
        rational::to_f64(&e).into(),
    ]);
    Ok(Outcome { json, table, exit_code: EXIT_OK })
}

fn hardy_sum_cmd(a: &HardySumArgs, tol: f64) -> Result<Outcome, CliError> {
    let spec = build_spec(&a.system)?;
    let p = parse_q("p", &a.p)?;
    let s = parse_q("s", &a.s)?;
    let delta = delta_or_default(&p, &a.delta)?;
    let mut params = HardyExponentParams::for_system(&spec, p.clone(), s)?;
    if a.eps != 0.0 {
        let eps = rational::from_f64_decimal(a.eps)?;
        let e = &params.e - eps;
        params = params.with_exponent(e);
    }
    let atom = ProductAtom::isotropic(build_counterexample_atom(&p, a.a, &delta)?, spec.d);
    let res = hardy_sum(&spec, &atom, &params, a.kmax, tol, &CoefficientCache::new())?;
    let rec = HardySumRecord::new(&spec, &params, &res);
    let mut table = Table::new(vec!["K_max", "E", "partial_sum", "tail_bound", "tail_unbounded"]);
    table.push(vec![
        res.k_max.into(),
        rec.params.e.clone().into(),
        res.partial_sum.into(),
        res.tail_bound.into(),
        res.tail_unbounded.into(),
    ]);
    Ok(Outcome { json: serde_json::to_value(&rec).expect("record serializes"), table, exit_code: EXIT_OK })
}

fn sharpness(a: &SharpnessRunArgs, tol: f64) -> Result<Outcome, CliError> {
    let spec = build_spec(&a.system)?;
    let p = parse_q("p", &a.p)?;
    let s = parse_q("s", &a.s)?;
    let mut params = SharpnessParams::new(spec, p, s, a.eps, a.kgrid.clone())?;
    if let Some(d) = &a.delta {
        params = params.with_delta(parse_q("delta", d)?);
    }
    if let Some(c) = a.c {
        params.c = c;
    }
    if let Some(k) = a.kcap {
        params.k_cap_factor = k;
    }
    params.validate()?;
    let rep = run_sharpness(&params, tol)?;
    let mut table = Table::new(vec!["K", "A", "S_eps", "tail", "r_min", "r_argmin", "sign_coherent", "flag"]);
    for r in &rep.rows {
        table.push(vec![
            r.k.into(),
            r.a_scale.into(),
            r.s_eps.into(),
            r.tail.into(),
            r.r_min.into(),
            r.r_argmin.into(),
            r.sign_coherent.into(),
            r.flag.clone().unwrap_or_default().into(),
        ]);
    }
    let flagged = rep.rows.iter().any(|r| r.flag.is_some());
    let exit_code = if flagged { EXIT_TOLERANCE } else { EXIT_OK };
    Ok(Outcome { json: serde_json::to_value(&rep).expect("report serializes"), table, exit_code })
}

fn check_table(c: &EstimateCheck) -> Table {
    let mut t = Table::new(vec!["grid", "max_ratio", "min_ratio"]);
    for g in &c.constants {
        t.push(vec![g.grid.into(), g.max_ratio.into(), g.min_ratio.into()]);
    }
    t
}

fn estimates_cmd(a: &EstimatesArgs) -> Result<Outcome, CliError> {
    let sys = one_d(&a.system)?;
    let c = match a.check {
        Check::Regime => estimates::check_regime_bounds(&sys, &a.kgrid, None)?,
        Check::SignSize => estimates::check_sign_size(&sys, a.j, a.l, &a.kgrid)?,
        Check::DerivativeSup => estimates::check_derivative_sup(&sys, a.j, &a.kgrid)?,
        Check::Holder => estimates::check_holder_modulus(&sys, a.j, None, &a.kgrid)?,
        Check::KernelHolder => estimates::check_kernel_holder(&sys, a.j, None, &a.rgrid)?,
        Check::KernelDerivSup => estimates::check_kernel_deriv_sup(&sys, a.j, &a.rgrid, None)?,
        Check::CondC => estimates::check_cond_c(&sys, a.j, &a.rgrid, None)?,
    };
    let exit_code = if c.passed { EXIT_OK } else { EXIT_CHECK_FAILED };
    Ok(Outcome { json: serde_json::to_value(&c).expect("check serializes"), table: check_table(&c), exit_code })
}
