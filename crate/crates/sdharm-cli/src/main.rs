//! Batch front door: verification suites, splitting classification,
//! Moser-flow experiments, Reeb orbits and closed-orbit censuses, with
//! machine-readable JSON/CSV artifacts.

mod report;

use std::collections::HashMap;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use sdharm::acs::{almost_complex_at, omega_matrix};
use sdharm::forms::DiffForm;
use sdharm::models::{
    classify_glued, classify_splitting, extract_linearization, make_model, nondegeneracy_scan,
    oriented_form, sd_basis, unoriented_form, volume_density, GridSpec, LPath, ModelSpec,
    Splitting,
};
use sdharm::moser::{
    eta_order_fit, graft_experiment, integrate_flow, sample_annulus, velocity_decay_fit,
    DampingProfile, FdOptions, MoserError, RunDescriptor,
};
use sdharm::reeb::{
    contact_volume, field_normalization_report, integrate_orbit, orbit_census,
    positivity_certificate, reeb_defect, reeb_field_at, ClosureVerdict, ContactKind, ContactModel,
    Multiplicity, OrbitParams,
};
use sdharm::ring::{rat, ChartPoint, Rational, RingElement, Var};

use report::{to_json, Report};

#[derive(Parser)]
#[command(
    name = "sdharm",
    about = "Verification and dynamics toolkit for self-dual 2-forms vanishing on a circle",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelArg {
    A,
    B,
    #[value(name = "B-glued")]
    BGlued,
}

impl ModelArg {
    fn name(&self) -> &'static str {
        match self {
            ModelArg::A => "A",
            ModelArg::B => "B",
            ModelArg::BGlued => "B-glued",
        }
    }
}

fn parse_rational(s: &str) -> Result<Rational, String> {
    s.parse::<Rational>()
        .map_err(|_| format!("`{s}` is not a rational number (use p/q)"))
}

#[derive(Args)]
struct CommonArgs {
    /// Model to operate on.
    #[arg(long, value_enum, default_value = "a")]
    model: ModelArg,
    /// Parameter R of the explicit unoriented model, as a rational p/q.
    #[arg(long = "R", value_parser = parse_rational, default_value = "1/2")]
    r: Rational,
    /// Grid resolution for scans and censuses.
    #[arg(long, default_value_t = 21)]
    grid: usize,
    /// Integration steps for flows.
    #[arg(long, default_value_t = 64)]
    steps: usize,
    /// Seed for all randomized sampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for JSON/CSV artifacts (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Tolerance overrides, NAME=VALUE (repeatable). Names: reeb-defect,
    /// oracle, j-squared, closure, drift, drift-abort, rational, pullback.
    #[arg(long = "tolerance", value_name = "NAME=VALUE")]
    tolerances: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the exact-identity and defining-property suite for a model.
    Verify(CommonArgs),
    /// Classify the eigenline splitting of a model by monodromy.
    Classify(CommonArgs),
    /// Run a Moser-flow experiment from a JSON descriptor.
    Moser(MoserArgs),
    /// Integrate one Reeb orbit and report closure and drift.
    Reeb(ReebArgs),
    /// Sweep orbit circles and report the closed-orbit census.
    Census(CommonArgs),
    /// Graft a form onto a model by the interpolation flow.
    Graft(GraftArgs),
}

#[derive(Args)]
struct MoserArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// JSON run descriptor (defaults to the built-in perturbation
    /// experiment on the oriented model).
    #[arg(long = "in")]
    input: Option<PathBuf>,
}

#[derive(Args)]
struct ReebArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Start point as "theta,x1,x2,x3"; x is projected to the sphere.
    #[arg(long, default_value = "0,0,0,1")]
    start: String,
    /// Integration horizon.
    #[arg(long, default_value_t = 100.0)]
    tmax: f64,
    /// RK4 step size.
    #[arg(long, default_value_t = 1e-3)]
    h: f64,
}

#[derive(Args)]
struct GraftArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// JSON file holding the source 2-form (defaults to a rotated copy
    /// of the oriented model).
    #[arg(long = "in")]
    input: Option<PathBuf>,
}

struct Tolerances(HashMap<String, f64>);

impl Tolerances {
    fn parse(args: &[String]) -> Result<Tolerances> {
        let mut map = HashMap::new();
        for item in args {
            let (name, value) = item
                .split_once('=')
                .ok_or_else(|| anyhow!("tolerance override `{item}` is not NAME=VALUE"))?;
            let value: f64 = value
                .parse()
                .with_context(|| format!("invalid tolerance value in `{item}`"))?;
            map.insert(name.to_string(), value);
        }
        Ok(Tolerances(map))
    }

    fn get(&self, name: &str, default: f64) -> f64 {
        self.0.get(name).copied().unwrap_or(default)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<bool> {
    match command {
        Command::Verify(args) => cmd_verify(args),
        Command::Classify(args) => cmd_classify(args),
        Command::Moser(args) => cmd_moser(args),
        Command::Reeb(args) => cmd_reeb(args),
        Command::Census(args) => cmd_census(args),
        Command::Graft(args) => cmd_graft(args),
    }
}

fn emit(report: &Report, out: &Option<PathBuf>, stem: &str) -> Result<()> {
    let json = to_json(report);
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let path = dir.join(format!("{stem}.json"));
            fs::write(&path, &json)?;
            println!(
                "{}: {} ({} checks) -> {}",
                report.command,
                if report.passed { "pass" } else { "FAIL" },
                report.checks.len(),
                path.display()
            );
        }
        None => println!("{json}"),
    }
    Ok(())
}

fn write_csv(
    out: &Option<PathBuf>,
    name: &str,
    header: &str,
    rows: &[Vec<f64>],
) -> Result<Option<PathBuf>> {
    let Some(dir) = out else {
        return Ok(None);
    };
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut body = String::with_capacity(rows.len() * 64 + header.len() + 1);
    body.push_str(header);
    body.push('\n');
    for row in rows {
        body.push_str(&report::csv_row(row));
        body.push('\n');
    }
    fs::write(&path, body)?;
    Ok(Some(path))
}

fn seeded_sphere_points(seed: u64, count: usize) -> Vec<ChartPoint> {
    // splitmix-style generator, deterministic across platforms.
    let mut state = seed ^ 0xA0761D6478BD642F;
    let mut next = move || {
        state = state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        (z ^ (z >> 31)) as f64 / u64::MAX as f64
    };
    let mut points = Vec::with_capacity(count);
    while points.len() < count {
        let x = [
            2.0 * next() - 1.0,
            2.0 * next() - 1.0,
            2.0 * next() - 1.0,
        ];
        let n = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        if n < 1e-3 || n > 1.0 {
            continue;
        }
        let theta = std::f64::consts::TAU * next();
        points.push(ChartPoint::sphere(theta, [x[0] / n, x[1] / n, x[2] / n]).unwrap());
    }
    points
}

fn expected_b_path(r: &Rational) -> LPath {
    let cos = RingElement::cos_theta(1);
    let sin = RingElement::sin_theta(1);
    let rc = RingElement::constant(r.clone());
    LPath::new([
        [&cos - &rc, sin.clone(), RingElement::zero()],
        [sin, -&cos, RingElement::zero()],
        [RingElement::zero(), RingElement::zero(), rc],
    ])
}

fn paths_equal(a: &LPath, b: &LPath) -> bool {
    (0..3).all(|i| (0..3).all(|j| (a.entry(i, j) - b.entry(i, j)).is_zero()))
}

fn cmd_verify(args: CommonArgs) -> Result<bool> {
    let tol = Tolerances::parse(&args.tolerances)?;
    let mut rep = Report::new("verify", Some(args.model.name().into()), args.seed);

    match args.model {
        ModelArg::A => verify_oriented(&mut rep, &tol, args.seed)?,
        ModelArg::B => verify_unoriented(&mut rep, &args.r)?,
        ModelArg::BGlued => verify_glued(&mut rep)?,
    }

    emit(&rep, &args.out, &format!("verify-{}", args.model.name()))?;
    Ok(rep.passed)
}

fn verify_oriented(rep: &mut Report, tol: &Tolerances, seed: u64) -> Result<()> {
    let w = oriented_form();
    rep.exact("closed", "d(omega_A) = 0", w.ext_d().is_zero());
    rep.exact(
        "self-dual",
        "*omega_A = omega_A",
        (&w.hodge4() - &w).is_zero(),
    );

    let half = rat(1, 2);
    let potential = (&RingElement::x1() * &RingElement::x1()).scale(&half)
        + (&RingElement::x2() * &RingElement::x2()).scale(&half)
        - (&RingElement::x3() * &RingElement::x3());
    let mu = DiffForm::one_form([
        RingElement::zero(),
        potential.partial(Var::X1),
        potential.partial(Var::X2),
        potential.partial(Var::X3),
    ]);
    let rebuilt = &mu.hodge3().map_err(|e| anyhow!("{e}"))?
        + &DiffForm::basis1(Var::Theta)
            .wedge(&mu)
            .map_err(|e| anyhow!("{e}"))?;
    rep.exact(
        "potential decomposition",
        "omega_A = *3(mu) + dtheta^mu with mu = d((x1^2+x2^2)/2 - x3^2)",
        (&rebuilt - &w).is_zero(),
    );

    let lin = extract_linearization(&w).map_err(|e| anyhow!("{e}"))?;
    let sym = lin.path.check_symmetric_traceless();
    rep.exact(
        "linearization symmetric+traceless",
        "L(theta) = L(theta)^T, tr L = 0",
        sym.symmetric && sym.traceless,
    );
    rep.exact(
        "linearization display",
        "L(omega_A) = diag(1, 1, -2)",
        paths_equal(
            &lin.path,
            &LPath::from_constant([[1, 0, 0], [0, 1, 0], [0, 0, -2]]),
        ),
    );
    let class = classify_splitting(&lin.path).map_err(|e| anyhow!("{e}"))?;
    rep.exact(
        "splitting oriented",
        "eigenline monodromy of L(omega_A) is +1",
        class.value == Splitting::Oriented && class.monodromy_sign == 1,
    );

    let contact = ContactModel::new(ContactKind::A);
    rep.exact(
        "contact primitive",
        "d(lambda_A) = omega_A",
        (&contact.omega - &w).is_zero(),
    );
    let vol = contact_volume(&contact);
    let x1 = RingElement::x1();
    let x2 = RingElement::x2();
    let x3 = RingElement::x3();
    let q = &(&x1 * &x1) + &(&x2 * &x2);
    let v = &x3 * &x3;
    let expected_vol = &(&q * &(&q + &v.scale(&rat(2, 1)))).scale(&rat(1, 2))
        + &(&v * &v).scale(&rat(2, 1));
    rep.exact(
        "contact volume",
        "sum(x_i dx_i) ^ lambda ^ d(lambda) = ((1/2)(x1^2+x2^2)(x1^2+x2^2+2x3^2) + 2 x3^4) vol",
        (&vol - &expected_vol).is_zero(),
    );
    rep.exact(
        "contact positivity",
        "volume coefficient is a positive combination of (x1^2+x2^2)^a (x3^2)^b",
        positivity_certificate(&vol).is_some(),
    );

    let a = omega_matrix(&w).map_err(|e| anyhow!("{e}"))?;
    let density = volume_density(&w).map_err(|e| anyhow!("{e}"))?;
    rep.exact(
        "quaternionic identity",
        "A^2 = -(x1^2 + x2^2 + 4 x3^2) I",
        a.mul(&a).equals_scalar_identity(&(-density)),
    );

    let j_tol = tol.get("j-squared", 1e-12);
    let mut max_j = 0.0f64;
    for p in seeded_sphere_points(seed.wrapping_add(1), 100) {
        let sample = almost_complex_at(&w, &p).map_err(|e| anyhow!("{e}"))?;
        let defect = (sample.j * sample.j + nalgebra::Matrix4::identity()).norm();
        max_j = max_j.max(defect);
    }
    rep.measured("almost complex square", "J^2 = -I off the circle", max_j, j_tol);

    let defect_tol = tol.get("reeb-defect", 1e-10);
    let mut max_lambda = 0.0f64;
    let mut max_contraction = 0.0f64;
    for p in seeded_sphere_points(seed.wrapping_add(2), 200) {
        let x = reeb_field_at(&contact, &p).map_err(|e| anyhow!("{e}"))?;
        let (l, c) = reeb_defect(&contact, &p, &x);
        max_lambda = max_lambda.max(l);
        max_contraction = max_contraction.max(c);
    }
    rep.measured(
        "Reeb normalization",
        "lambda(X) = 1 on S^1 x S^2",
        max_lambda,
        defect_tol,
    );
    rep.measured(
        "Reeb kernel",
        "d(lambda)(X, tangent) = 0 on S^1 x S^2",
        max_contraction,
        defect_tol,
    );

    let oracle_tol = tol.get("oracle", 1e-12);
    let pole = ChartPoint::sphere(0.0, [0.0, 0.0, 1.0]).map_err(|e| anyhow!("{e}"))?;
    let x_pole = reeb_field_at(&contact, &pole).map_err(|e| anyhow!("{e}"))?;
    let pole_err = (x_pole[0] - 1.0)
        .abs()
        .max(x_pole[1].abs())
        .max(x_pole[2].abs())
        .max(x_pole[3].abs());
    rep.measured(
        "Reeb at poles",
        "X = d/dtheta at (0,0,+-1)",
        pole_err,
        oracle_tol,
    );
    let equator = ChartPoint::sphere(0.0, [1.0, 0.0, 0.0]).map_err(|e| anyhow!("{e}"))?;
    let x_eq = reeb_field_at(&contact, &equator).map_err(|e| anyhow!("{e}"))?;
    let eq_err = (x_eq[0] + 2.0)
        .abs()
        .max(x_eq[1].abs())
        .max(x_eq[2].abs())
        .max(x_eq[3].abs());
    rep.measured(
        "Reeb at equator",
        "X = -2 d/dtheta at (+-1,0,0)",
        eq_err,
        oracle_tol,
    );

    let resolution = field_normalization_report(&contact).map_err(|e| anyhow!("{e}"))?;
    rep.exact(
        "field normalization resolved",
        "lambda(X) = 1 forces denominator -((1/2)(x1^2+x2^2)(x1^2+x2^2+2x3^2) + 2 x3^4)",
        resolution.resolved_identity_holds,
    );
    rep.note(resolution.note);
    Ok(())
}

fn verify_unoriented(rep: &mut Report, r: &Rational) -> Result<()> {
    let model = make_model(ModelSpec::BExplicit(r.clone())).map_err(|e| anyhow!("{e}"))?;
    let w = model.form;
    rep.exact("closed", "d(omega_B) = 0", w.ext_d().is_zero());
    rep.exact(
        "self-dual",
        "*omega_B = omega_B",
        (&w.hodge4() - &w).is_zero(),
    );
    let lin = extract_linearization(&w).map_err(|e| anyhow!("{e}"))?;
    let sym = lin.path.check_symmetric_traceless();
    rep.exact(
        "linearization symmetric+traceless",
        "L(theta) = L(theta)^T, tr L = 0",
        sym.symmetric && sym.traceless,
    );
    rep.exact(
        "linearization display",
        "L(omega_B) = [[cos t - R, sin t, 0], [sin t, -cos t, 0], [0, 0, R]]",
        paths_equal(&lin.path, &expected_b_path(r)),
    );
    let class = classify_splitting(&lin.path).map_err(|e| anyhow!("{e}"))?;
    rep.exact(
        "splitting unoriented",
        "eigenline monodromy of L(omega_B) is -1",
        class.value == Splitting::Unoriented && class.monodromy_sign == -1,
    );
    let a = omega_matrix(&w).map_err(|e| anyhow!("{e}"))?;
    let density = volume_density(&w).map_err(|e| anyhow!("{e}"))?;
    rep.exact(
        "quaternionic identity",
        "A^2 = -(L1^2 + L2^2 + L3^2) I",
        a.mul(&a).equals_scalar_identity(&(-density)),
    );
    let scan = nondegeneracy_scan(
        &w,
        &GridSpec {
            theta_samples: 8,
            x_samples: 8,
            radius: 1.0,
            exclude_core: true,
        },
    )
    .map_err(|e| anyhow!("{e}"))?;
    rep.push(
        "nondegenerate off the circle",
        "omega_B ^ omega_B > 0 away from x = 0",
        scan.min_density > 0.0 && scan.zeros.is_empty(),
        Some(scan.min_density),
        0.0,
    );
    Ok(())
}

fn verify_glued(rep: &mut Report) -> Result<()> {
    let model = make_model(ModelSpec::BGlued).map_err(|e| anyhow!("{e}"))?;
    let w = model.form;
    let deck = model.glue.expect("glued model carries its deck map");
    rep.exact(
        "closed",
        "d(omega) = 0 for the glued base form",
        w.ext_d().is_zero(),
    );
    rep.exact(
        "self-dual",
        "*omega = omega for the glued base form",
        (&w.hodge4() - &w).is_zero(),
    );
    rep.exact(
        "glueing invariance",
        "phi^* omega = omega",
        (&w.pullback(&deck).map_err(|e| anyhow!("{e}"))? - &w).is_zero(),
    );
    let contact = ContactModel::new(ContactKind::BGlued);
    rep.exact(
        "contact primitive",
        "d(lambda_B) = omega_B on the chart",
        (&contact.omega - &w).is_zero(),
    );
    rep.exact(
        "contact glueing invariance",
        "phi^* lambda = lambda",
        (&contact
            .lambda
            .pullback(&deck)
            .map_err(|e| anyhow!("{e}"))?
            - &contact.lambda)
            .is_zero(),
    );
    let lin = extract_linearization(&w).map_err(|e| anyhow!("{e}"))?;
    let class = classify_glued(&lin.path, &deck).map_err(|e| anyhow!("{e}"))?;
    rep.exact(
        "splitting unoriented",
        "deck-twisted eigenline monodromy is -1",
        class.value == Splitting::Unoriented && class.monodromy_sign == -1,
    );
    Ok(())
}

fn cmd_classify(args: CommonArgs) -> Result<bool> {
    let mut rep = Report::new("classify", Some(args.model.name().into()), args.seed);
    let samples = (args.grid.max(4) * 17).max(360);
    let (path, deck) = match args.model {
        ModelArg::A => (
            extract_linearization(&oriented_form())
                .map_err(|e| anyhow!("{e}"))?
                .path,
            None,
        ),
        ModelArg::B => (
            extract_linearization(&unoriented_form(&args.r))
                .map_err(|e| anyhow!("{e}"))?
                .path,
            None,
        ),
        ModelArg::BGlued => {
            let model = make_model(ModelSpec::BGlued).map_err(|e| anyhow!("{e}"))?;
            (
                extract_linearization(&model.form)
                    .map_err(|e| anyhow!("{e}"))?
                    .path,
                model.glue,
            )
        }
    };
    let classify = |n: usize| -> Result<sdharm::models::SplittingClass> {
        let p = path.clone().with_sample_count(n);
        match &deck {
            None => classify_splitting(&p).map_err(|e| anyhow!("{e}")),
            Some(map) => classify_glued(&p, map).map_err(|e| anyhow!("{e}")),
        }
    };
    let class = classify(samples)?;
    let refined = classify(samples * 2)?;
    rep.exact(
        "refinement stable",
        "monodromy sign is stable under doubling the sample count",
        class.monodromy_sign == refined.monodromy_sign,
    );
    rep.payload = Some(serde_json::json!({
        "class": format!("{:?}", class.value),
        "monodromy_sign": class.monodromy_sign,
        "min_gap": class.min_gap,
        "samples": class.samples,
    }));
    emit(&rep, &args.out, &format!("classify-{}", args.model.name()))?;
    Ok(rep.passed)
}

fn cmd_moser(args: MoserArgs) -> Result<bool> {
    let common = args.common;
    let tol = Tolerances::parse(&common.tolerances)?;
    let mut rep = Report::new("moser", Some(common.model.name().into()), common.seed);
    let mut descriptor = match &args.input {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading descriptor {}", path.display()))?;
            serde_json::from_str::<RunDescriptor>(&text)
                .with_context(|| format!("parsing descriptor {}", path.display()))?
        }
        None => {
            let mut d = RunDescriptor::default_experiment();
            d.family.model = Some(common.model.name().to_string());
            d
        }
    };
    if common.seed != 0 {
        descriptor.particles.seed = common.seed;
    }
    descriptor.steps = common.steps;

    let (run, particles) = descriptor.build().map_err(|e| anyhow!("{e}"))?;
    rep.note(format!(
        "loop integral of the primitive along the core: {} * 2*pi",
        run.loop_integral
    ));
    let fd = FdOptions {
        richardson: descriptor.richardson,
        ..FdOptions::default()
    };
    let flow =
        integrate_flow(&run, &particles, descriptor.steps, &fd).map_err(|e| anyhow!("{e}"))?;
    rep.measured(
        "pullback identity",
        "flow of i_X omega_t = -eta pulls omega_1 back to omega_0",
        flow.max_pullback_error,
        tol.get("pullback", 1e-4),
    );
    let eta_fit = eta_order_fit(&run, 0.05, 10, 24);
    let decay = velocity_decay_fit(&run, 0.01, 0.1, 10, 24).map_err(|e| anyhow!("{e}"))?;
    rep.push(
        "velocity bounded near the circle",
        "max ‖X‖/|x| stays finite on 0.01 <= |x| <= 0.1",
        decay.max_ratio.is_finite(),
        Some(decay.max_ratio),
        f64::INFINITY,
    );
    rep.payload = Some(serde_json::json!({
        "max_pullback_error": flow.max_pullback_error,
        "particles": flow.step_stats.particles,
        "steps": flow.step_stats.steps,
        "flow_integrations": flow.step_stats.flow_integrations,
        "eta_order_slope": eta_fit.slope,
        "velocity_decay_slope": decay.slope,
        "velocity_ratio_bound": decay.max_ratio,
    }));

    let rows: Vec<Vec<f64>> = flow
        .particles
        .iter()
        .zip(flow.pullback_errors.iter())
        .map(|((s, e), err)| vec![s[0], s[1], s[2], s[3], e[0], e[1], e[2], e[3], *err])
        .collect();
    if let Some(path) = write_csv(
        &common.out,
        "moser-particles.csv",
        "theta0,x1_0,x2_0,x3_0,theta1,x1_1,x2_1,x3_1,pullback_error",
        &rows,
    )? {
        rep.note(format!("particle table: {}", path.display()));
    }
    emit(&rep, &common.out, "moser")?;
    Ok(rep.passed)
}

fn parse_start(s: &str) -> Result<ChartPoint> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .with_context(|| format!("invalid start point `{s}`"))?;
    if parts.len() != 4 {
        bail!("start point needs four components theta,x1,x2,x3");
    }
    let x = [parts[1], parts[2], parts[3]];
    let n = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
    if n == 0.0 {
        bail!("start point must have x != 0");
    }
    ChartPoint::sphere(parts[0], [x[0] / n, x[1] / n, x[2] / n]).map_err(|e| anyhow!("{e}"))
}

fn cmd_reeb(args: ReebArgs) -> Result<bool> {
    let common = args.common;
    let tol = Tolerances::parse(&common.tolerances)?;
    let kind = match common.model {
        ModelArg::A | ModelArg::B => ContactKind::A,
        ModelArg::BGlued => ContactKind::BGlued,
    };
    let mut rep = Report::new("reeb", Some(common.model.name().into()), common.seed);
    if common.model == ModelArg::B {
        rep.note("contact data lives on the chart; the explicit unoriented model shares it with A");
    }
    let model = ContactModel::new(kind);
    let start = parse_start(&args.start)?;
    let total_steps = (args.tmax / args.h).ceil() as usize;
    let params = OrbitParams {
        t_max: args.tmax,
        step: args.h,
        closure_tol: tol.get("closure", 1e-6),
        drift_abort: tol.get("drift-abort", 1e-6),
        max_passes: 64,
        record_every: (total_steps / 10_000).max(1),
    };
    let (record, samples) = integrate_orbit(&model, &start, &params).map_err(|e| anyhow!("{e}"))?;
    rep.measured(
        "x3 conserved",
        "x3 is constant along Reeb orbits",
        record.drift_x3,
        tol.get("drift", 1e-8),
    );
    rep.measured(
        "x1^2+x2^2 conserved",
        "x1^2 + x2^2 is constant along Reeb orbits",
        record.drift_plane,
        tol.get("drift", 1e-8),
    );
    rep.payload = Some(serde_json::to_value(&record)?);
    if let Some(path) = write_csv(
        &common.out,
        "orbit.csv",
        "t,theta,x1,x2,x3",
        &samples.iter().map(|r| r.to_vec()).collect::<Vec<_>>(),
    )? {
        rep.note(format!("trajectory: {}", path.display()));
    }
    emit(&rep, &common.out, "reeb")?;
    Ok(rep.passed)
}

fn cmd_census(args: CommonArgs) -> Result<bool> {
    let tol = Tolerances::parse(&args.tolerances)?;
    let kind = match args.model {
        ModelArg::A | ModelArg::B => ContactKind::A,
        ModelArg::BGlued => ContactKind::BGlued,
    };
    let mut rep = Report::new("census", Some(args.model.name().into()), args.seed);
    let model = ContactModel::new(kind);
    let entries =
        orbit_census(&model, args.grid, tol.get("rational", 1e-9)).map_err(|e| anyhow!("{e}"))?;
    match kind {
        ContactKind::A => {
            let closed_at = |r: f64| {
                entries.iter().any(|e| {
                    (e.r - r).abs() < 1e-12 && matches!(e.verdict, ClosureVerdict::Closed(_))
                })
            };
            rep.exact(
                "equatorial family closed",
                "orbits {(x1,x2,0)} x S^1 with x1^2+x2^2 = 1 are closed",
                closed_at(0.0),
            );
            rep.exact(
                "pole orbits closed",
                "orbits {(0,0,+-1)} x S^1 are closed",
                closed_at(1.0) && closed_at(-1.0),
            );
        }
        ContactKind::BGlued => {
            let singles = entries
                .iter()
                .filter(|e| e.r == 0.0 && e.multiplicity == Multiplicity::Single)
                .count();
            rep.exact(
                "deck-fixed singles",
                "single closed orbits at (1,0,0) and (-1,0,0)",
                singles == 2,
            );
            rep.exact(
                "doubled equatorial orbits",
                "equatorial orbits with x2 != 0 close only after two deck passes",
                entries.iter().any(|e| {
                    e.r == 0.0 && e.start[1] != 0.0 && e.multiplicity == Multiplicity::Doubled
                }),
            );
            rep.exact(
                "doubled pole orbit",
                "the pole orbit is a double of the oriented one",
                entries
                    .iter()
                    .any(|e| e.r == 1.0 && e.multiplicity == Multiplicity::Doubled),
            );
        }
    }
    rep.payload = Some(serde_json::to_value(&entries)?);
    emit(&rep, &args.out, &format!("census-{}", args.model.name()))?;
    Ok(rep.passed)
}

/// A rotated copy of the oriented model: conjugate the linearization by
/// the rational (3,4,5) rotation in the (x1, x3) plane.
fn rotated_oriented_form() -> DiffForm {
    let l: [[(i64, i64); 3]; 3] = [
        [(-23, 25), (0, 1), (36, 25)],
        [(0, 1), (1, 1), (0, 1)],
        [(36, 25), (0, 1), (-2, 25)],
    ];
    let coords = [RingElement::x1(), RingElement::x2(), RingElement::x3()];
    let mut w = DiffForm::zero(2);
    for i in 0..3 {
        let mut li = RingElement::zero();
        for (j, coord) in coords.iter().enumerate() {
            let (p, q) = l[i][j];
            li = li + coord.scale(&rat(p, q));
        }
        w = &w + &(&li * &sd_basis(i + 1));
    }
    w
}

fn cmd_graft(args: GraftArgs) -> Result<bool> {
    let common = args.common;
    let tol = Tolerances::parse(&common.tolerances)?;
    let mut rep = Report::new("graft", Some(common.model.name().into()), common.seed);
    let source = match &args.input {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading form {}", path.display()))?;
            serde_json::from_str::<DiffForm>(&text)
                .with_context(|| format!("parsing form {}", path.display()))?
        }
        None => rotated_oriented_form(),
    };
    let target = match common.model {
        ModelArg::A => oriented_form(),
        ModelArg::B | ModelArg::BGlued => unoriented_form(&common.r),
    };
    let particles = sample_annulus(common.seed.max(1), 24, 0.2, 0.6);
    let damp = DampingProfile::new(0.5, 0.9).map_err(|e| anyhow!("{e}"))?;
    match graft_experiment(&source, &target, &particles, common.steps, damp) {
        Ok(report) => {
            rep.exact(
                "splitting classes match",
                "source and target have equal eigenline monodromy",
                report.source_class.value == report.target_class.value,
            );
            rep.measured(
                "pullback identity",
                "the interpolation flow carries the source onto the model",
                report.flow.max_pullback_error,
                tol.get("pullback", 1e-3),
            );
            rep.payload = Some(serde_json::json!({
                "radius": report.radius,
                "source_class": format!("{:?}", report.source_class.value),
                "target_class": format!("{:?}", report.target_class.value),
                "max_pullback_error": report.flow.max_pullback_error,
                "particles": report.flow.step_stats.particles,
            }));
        }
        Err(MoserError::ClassMismatch { found, target }) => {
            rep.exact(
                "splitting classes match",
                "source and target have equal eigenline monodromy",
                false,
            );
            rep.note(format!(
                "grafting refused: source class {found:?}, target class {target:?}"
            ));
        }
        Err(other) => return Err(anyhow!("{other}")),
    }
    emit(&rep, &common.out, "graft")?;
    Ok(rep.passed)
}
