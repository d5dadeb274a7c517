//! Command-line interface.
//!
//! Exit codes: 0 = done (SAFE for `verify`), 1 = UNSAFE, 2 = usage or input
//! validation error, 3 = numerical failure (a computation that could not be
//! completed to the requested accuracy).

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::benchgen::{self, HeatParams};
use crate::error::{Error, Result};
use crate::krylov;
use crate::model::{load_problem, save_problem};
use crate::verifier::{self, SimDirection, Status, Strategy, VerifyOptions};

#[derive(Parser)]
#[command(
    name = "kreach",
    version,
    about = "Time-bounded safety verification of high-dimensional linear dynamics",
    propagate_version = true
)]
struct Cli {
    /// Worker threads for per-trajectory simulation (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum StrategyArg {
    /// Pick automatically from size and symmetry
    Auto,
    /// Dense step exponential (small systems)
    Dense,
    /// Adaptive Runge–Kutta per start column
    Rk45,
    /// Arnoldi iteration with certified error control
    Arnoldi,
    /// Lanczos iteration (symmetric matrices), projected storage
    Lanczos,
}

impl StrategyArg {
    fn resolve(self) -> Option<Strategy> {
        match self {
            StrategyArg::Auto => None,
            StrategyArg::Dense => Some(Strategy::DenseExpm),
            StrategyArg::Rk45 => Some(Strategy::Rk45),
            StrategyArg::Arnoldi => Some(Strategy::KrylovArnoldi),
            StrategyArg::Lanczos => Some(Strategy::KrylovLanczos),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum DirectionArg {
    /// Transpose when there are fewer outputs than initial directions
    Auto,
    /// Simulate the initial-space columns forward
    Forward,
    /// Simulate the output directions on the transposed system
    Transpose,
}

impl DirectionArg {
    fn resolve(self) -> Option<SimDirection> {
        match self {
            DirectionArg::Auto => None,
            DirectionArg::Forward => Some(SimDirection::Forward),
            DirectionArg::Transpose => Some(SimDirection::Transpose),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Args)]
struct SimArgs {
    /// Simulation strategy
    #[arg(long, value_enum, default_value_t = StrategyArg::Auto)]
    strategy: StrategyArg,
    /// Simulation direction
    #[arg(long, value_enum, default_value_t = DirectionArg::Auto)]
    direction: DirectionArg,
    /// Absolute error target for Krylov trajectory approximation
    #[arg(long, default_value_t = 1e-8)]
    epsilon: f64,
    /// Auto-select the dense strategy up to this many states
    #[arg(long, default_value_t = 500)]
    dense_cap: usize,
    /// First Krylov checkpoint dimension
    #[arg(long, default_value_t = 4)]
    k_min: usize,
    /// Krylov dimension cap (default: the state dimension)
    #[arg(long)]
    k_max: Option<usize>,
}

impl SimArgs {
    fn options(&self) -> VerifyOptions {
        let mut opts = VerifyOptions {
            strategy: self.strategy.resolve(),
            direction: self.direction.resolve(),
            epsilon: self.epsilon,
            dense_cap: self.dense_cap,
            ..VerifyOptions::default()
        };
        opts.krylov.k_min = self.k_min;
        opts.krylov.k_max = self.k_max;
        opts
    }
}

#[derive(Subcommand)]
enum Command {
    /// Decide time-bounded safety of a problem file
    Verify {
        /// problem.json path
        problem: PathBuf,
        #[command(flatten)]
        sim: SimArgs,
        /// Write the verdict here instead of stdout
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Emit per-step bounds of the reachable output projection as CSV
    Plot {
        /// problem.json path
        problem: PathBuf,
        #[command(flatten)]
        sim: SimArgs,
        /// Write the CSV here instead of stdout
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Generate a benchmark problem directory
    Gen {
        #[command(subcommand)]
        target: GenTarget,
    },
    /// Predict the verification working set for given problem dimensions
    EstimateMemory {
        /// Strategy whose working set to estimate
        #[arg(long, value_enum)]
        strategy: StrategyArg,
        /// State dimension
        #[arg(long)]
        n: u64,
        /// Initial-space columns
        #[arg(short, long)]
        i: u64,
        /// Output rows
        #[arg(short, long)]
        o: u64,
        /// Number of time steps
        #[arg(short, long)]
        s: u64,
        /// Krylov dimension (ignored by dense/rk45)
        #[arg(short, long, default_value_t = 0)]
        k: u64,
    },
    /// Run built-in consistency checks against known closed forms
    Selftest,
}

#[derive(Args)]
struct GenCommon {
    /// Directory for problem.json and any matrix side files
    #[arg(long, default_value = "generated")]
    out_dir: PathBuf,
    /// Inline matrices into the JSON up to this many states
    #[arg(long, default_value_t = 100)]
    inline_limit: usize,
}

#[derive(Subcommand)]
enum GenTarget {
    /// 4-state forced oscillator with closed-form step values
    Oscillator {
        /// Position level whose exact hit is unsafe
        #[arg(long, default_value_t = 4.0)]
        unsafe_level: f64,
        #[command(flatten)]
        common: GenCommon,
    },
    /// Heat conduction on an m×m×m grid with one leaky face
    Heat3d {
        /// Nodes per axis (m³ states)
        #[arg(long, default_value_t = 5)]
        m: usize,
        /// Thermal diffusivity
        #[arg(long, default_value_t = 0.01)]
        diffusivity: f64,
        /// Heat-exchange coefficient of the x = 1 face
        #[arg(long, default_value_t = 0.5)]
        exchange: f64,
        /// Time step
        #[arg(long, default_value_t = 0.02)]
        step: f64,
        /// Time horizon
        #[arg(long, default_value_t = 20.0)]
        time_bound: f64,
        #[command(flatten)]
        common: GenCommon,
    },
    /// Block-diagonal replication of an externally supplied base model
    Helicopter {
        /// Directory with a.mtx, init_space.mtx, init_constraints.json
        #[arg(long)]
        base_dir: PathBuf,
        /// Number of copies on the block diagonal
        #[arg(long, default_value_t = 4)]
        copies: usize,
        /// Base state index whose copy-average is the output
        #[arg(long, default_value_t = 7)]
        output_index: usize,
        #[command(flatten)]
        common: GenCommon,
    },
}

/// Run the CLI against the process arguments, returning the exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be at least 1");
            return 2;
        }
        // a failure here means a pool already exists (e.g. in tests); the
        // default pool is fine then
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                2
            } else {
                3
            }
        }
    }
}

fn write_out(path: &Option<PathBuf>, content: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, content).map_err(|e| Error::io(p, e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(content.as_bytes())
                .map_err(|e| Error::io(std::path::Path::new("<stdout>"), e))
        }
    }
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Verify { problem, sim, output, format } => {
            let prob = load_problem(&problem)?;
            let opts = sim.options();
            let mut verdict = verifier::verify(&prob, &opts)?;
            // huge states are unwieldy in a verdict file; z0 always suffices
            // to reproduce x0 = E·z0
            if prob.n() > 1000 {
                verdict.witness_x0 = None;
            }
            let rendered = match format {
                Format::Json => {
                    let mut s = serde_json::to_string_pretty(&verdict)
                        .map_err(|e| Error::Invalid(format!("verdict serialization failed: {e}")))?;
                    s.push('\n');
                    s
                }
                Format::Text => render_text(&verdict),
            };
            write_out(&output, &rendered)?;
            Ok(if verdict.status == Status::Unsafe { 1 } else { 0 })
        }
        Command::Plot { problem, sim, output } => {
            let prob = load_problem(&problem)?;
            let opts = sim.options();
            let basis = verifier::compute_basis_sequence(&prob, &opts)?;
            let bounds = verifier::project_bounds(&prob, &basis)?;
            let o = prob.output_dim();
            let mut csv = String::from("step,time");
            if o == 1 {
                csv.push_str(",min,max");
            } else {
                for r in 1..=o {
                    csv.push_str(&format!(",min_{r},max_{r}"));
                }
            }
            csv.push('\n');
            for (j, row) in bounds.iter().enumerate() {
                csv.push_str(&format!("{j},{}", j as f64 * prob.step));
                for (lo, hi) in row {
                    csv.push_str(&format!(",{lo},{hi}"));
                }
                csv.push('\n');
            }
            write_out(&output, &csv)?;
            Ok(0)
        }
        Command::Gen { target } => {
            let (problem, common) = match target {
                GenTarget::Oscillator { unsafe_level, common } => {
                    (benchgen::gen_oscillator(unsafe_level), common)
                }
                GenTarget::Heat3d { m, diffusivity, exchange, step, time_bound, common } => {
                    let params = HeatParams {
                        m,
                        diffusivity,
                        exchange_coeff: exchange,
                        step,
                        time_bound,
                        ..HeatParams::default()
                    };
                    (benchgen::gen_heat3d(&params)?, common)
                }
                GenTarget::Helicopter { base_dir, copies, output_index, common } => {
                    let base = benchgen::load_helicopter_base(&base_dir, output_index)?;
                    (benchgen::gen_helicopter(&base, copies)?, common)
                }
            };
            let path = save_problem(&problem, &common.out_dir, common.inline_limit)?;
            println!(
                "wrote {} ({} states, {} steps)",
                path.display(),
                problem.n(),
                problem.n_steps()
            );
            Ok(0)
        }
        Command::EstimateMemory { strategy, n, i, o, s, k } => {
            let Some(strategy) = strategy.resolve() else {
                return Err(Error::Invalid(
                    "estimate-memory needs a concrete strategy, not auto".into(),
                ));
            };
            if matches!(strategy, Strategy::KrylovArnoldi | Strategy::KrylovLanczos) && k == 0 {
                return Err(Error::Invalid("Krylov strategies need --k".into()));
            }
            let bytes = verifier::estimate_memory(strategy, n, i, o, s, k);
            println!("strategy {strategy}: {} bytes ({:.2} MiB)", bytes, bytes as f64 / (1024.0 * 1024.0));
            println!("  basis sequence: {} bytes", 8 * o * i * s);
            println!("  working set:    {} bytes", bytes - 8 * o * i * s);
            Ok(0)
        }
        Command::Selftest => {
            selftest()?;
            Ok(0)
        }
    }
}

fn render_text(v: &verifier::Verdict) -> String {
    let mut out = String::new();
    match v.status {
        Status::Safe => {
            out.push_str(&format!(
                "SAFE: no step can reach the unsafe set ({} of {} steps checked, strategy {}, {:?})\n",
                v.steps_checked, v.steps_total, v.strategy, v.direction
            ));
        }
        Status::Unsafe => {
            out.push_str(&format!(
                "UNSAFE at step {} (t = {})\n",
                v.step_index.unwrap_or(0),
                v.time.unwrap_or(0.0)
            ));
            if let Some(z0) = &v.witness_z0 {
                out.push_str(&format!("witness z0: {z0:?}\n"));
            }
            if let Some(y) = &v.witness_outputs {
                out.push_str(&format!("witness outputs: {y:?}\n"));
            }
            if let Some(rel) = v.validation_rel_error {
                out.push_str(&format!("re-simulation relative error: {rel:e}\n"));
            }
        }
    }
    if let Some(err) = v.certified_error {
        out.push_str(&format!("certified trajectory error: {err:e}\n"));
    }
    if let Some(k) = v.krylov_max_k {
        out.push_str(&format!("largest Krylov dimension: {k}\n"));
    }
    out
}

struct SplitMix64(u64);

impl SplitMix64 {
    fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    }
}

fn selfcheck(name: &str, ok: bool, detail: String) -> Result<()> {
    if ok {
        println!("selftest: {name} ok");
        Ok(())
    } else {
        Err(Error::Numerical(format!("selftest {name} failed: {detail}")))
    }
}

/// Fast consistency checks against closed forms; all deterministic.
fn selftest() -> Result<()> {
    use crate::dense::{self, DenseMatrix};
    use crate::model::SparseMatrix;

    // rotation-with-clock exponential at t = 3π/4
    {
        let t = 3.0 * std::f64::consts::FRAC_PI_4;
        let m = DenseMatrix::from_rows(&[vec![0.0, t], vec![-t, 0.0]])?;
        let e = dense::expm(&m)?;
        let want = t.cos();
        selfcheck(
            "step-exponential",
            (e.get(0, 0) - want).abs() < 1e-12,
            format!("{} vs {want}", e.get(0, 0)),
        )?;
    }

    // truncation bound in log space, huge inputs
    {
        let small = krylov::apriori_error(1.0, 5, 1.0);
        let big = krylov::apriori_error(32771611.0, 1_000_000, 1.0);
        selfcheck(
            "apriori-bound",
            (small + 1.644886764144373).abs() < 1e-12 && (big - 16182318.69432269).abs() < 1.0,
            format!("{small}, {big}"),
        )?;
    }

    // invariant-subspace start must break down with a zero bound
    {
        let a = SparseMatrix::from_dense(&[vec![1.0, 0.0], vec![0.0, 2.0]])?;
        let dec = krylov::arnoldi_fixed(&a, &[1.0, 0.0], 2)?;
        selfcheck(
            "krylov-breakdown",
            dec.exact_breakdown && dec.k == 1 && dec.residual_coupling == 0.0,
            format!("k = {}, coupling = {}", dec.k, dec.residual_coupling),
        )?;
    }

    // oscillator verdict with closed-form witness
    {
        let problem = benchgen::gen_oscillator(4.0);
        let verdict = verifier::verify(&problem, &VerifyOptions::default())?;
        let witness = verdict.witness_z0.as_ref().map_or(f64::NAN, |z| z[0]);
        selfcheck(
            "oscillator-verdict",
            verdict.status == Status::Unsafe
                && verdict.step_index == Some(3)
                && (witness - 0.65685424949238058).abs() < 1e-6,
            format!("{:?} step {:?} witness {witness}", verdict.status, verdict.step_index),
        )?;
    }

    // strategies must agree on a small symmetric system
    {
        let problem = benchgen::gen_heat3d(&HeatParams { m: 3, ..HeatParams::default() })?;
        let dense_basis = verifier::compute_basis_sequence(
            &problem,
            &VerifyOptions { strategy: Some(Strategy::DenseExpm), ..VerifyOptions::default() },
        )?;
        let lanczos_basis = verifier::compute_basis_sequence(
            &problem,
            &VerifyOptions { strategy: Some(Strategy::KrylovLanczos), ..VerifyOptions::default() },
        )?;
        let mut worst = 0.0f64;
        for (a, b) in dense_basis.entries.iter().zip(&lanczos_basis.entries) {
            worst = worst.max((a.get(0, 0) - b.get(0, 0)).abs());
        }
        selfcheck("strategy-agreement", worst < 1e-6, format!("max divergence {worst:e}"))?;
    }

    // certified bounds dominate true errors on seeded random systems
    {
        let mut rng = SplitMix64(42);
        let mut worst_ratio = 0.0f64;
        let mut sound = true;
        for _ in 0..5 {
            let n = 15;
            let mut rows = vec![vec![0.0; n]; n];
            for row in rows.iter_mut() {
                for x in row.iter_mut() {
                    *x = rng.next_f64();
                }
            }
            let a = SparseMatrix::from_dense(&rows)?;
            let v: Vec<f64> = (0..n).map(|_| rng.next_f64()).collect();
            let tau = 1.0;
            let b = a.negated();
            let dec = krylov::arnoldi_fixed(&b, &v, 7)?;
            let nu = krylov::estimate_nu(&b, 1e-6)?;
            let h = dec.h_matrix();
            let bound = dec.v_norm
                * krylov::aposteriori_error(&krylov::ErrorBoundInputs {
                    h_matrix: &h,
                    residual_coupling: dec.residual_coupling,
                    nu,
                    tau,
                    quad_rel_tol: 1e-3,
                })?;
            let approx = krylov::krylov_eval(&dec, tau)?;
            let truth = dense::expm(&a.to_dense().scaled(tau))?.mat_vec(&v);
            let err: f64 = truth
                .iter()
                .zip(&approx)
                .map(|(x, y)| (x - y).powi(2))
                .sum::<f64>()
                .sqrt();
            sound &= err <= bound * (1.0 + 1e-9) + 1e-14;
            worst_ratio = worst_ratio.max(err / bound.max(1e-300));
        }
        selfcheck("error-bound-soundness", sound, format!("worst error/bound {worst_ratio:.3}"))?;
    }

    Ok(())
}
