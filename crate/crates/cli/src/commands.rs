use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use ptqtp_core::oracle::MAX_ORACLE_LEN;
use ptqtp_core::storage::{
    model_memory_report, preset_shapes, read_quantized_with_dtype, read_tensor, write_atomic,
    write_quantized, write_tensor, LayerShape, MemoryMethod,
};
use ptqtp_core::sweep::run_sweep;
use ptqtp_core::{
    bench_matvec, decompose, global_optimum_row, reconstruct, regularized_objective, synth, DType,
    DecomposeConfig, WeightMatrix,
};
use serde::Serialize;

use crate::args::*;
use crate::manifest;
use crate::report::*;
use crate::UsageError;

fn read_weights(path: &Path) -> Result<WeightMatrix> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    read_tensor(&bytes).with_context(|| format!("parsing {}", path.display()))
}

fn read_layer(path: &Path) -> Result<(ptqtp_core::QuantizedLayer, DType)> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    read_quantized_with_dtype(&bytes).with_context(|| format!("parsing {}", path.display()))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    write_atomic(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn quantize_one(
    name: Option<String>,
    input: &Path,
    output: &Path,
    cfg: &DecomposeConfig,
    scale: DType,
) -> Result<RunReport> {
    let w = read_weights(input)?;
    let start = Instant::now();
    let (q, trace) = decompose(&w, cfg)?;
    let wall_seconds = start.elapsed().as_secs_f64();
    let bytes = write_quantized(&q, scale)?;
    // figures come from the stored bytes so stats on the files reproduces them
    let (stored, _) = read_quantized_with_dtype(&bytes)?;
    let figures = LayerFigures::compute(&w, &stored)?;
    write_file(output, &bytes)?;
    Ok(RunReport {
        name,
        input: InputInfo {
            path: display(input),
            n: w.rows(),
            d: w.cols(),
        },
        output: display(output),
        config: *cfg,
        scale_format: dtype_name(scale),
        iterations: trace.iterations(),
        converged: trace.converged,
        final_error: trace.final_error(),
        escalations: trace.records.iter().map(|r| r.escalated).sum(),
        figures,
        wall_seconds,
    })
}

pub fn quantize(args: QuantizeArgs) -> Result<()> {
    let cfg = args.decompose.config();
    cfg.validate()?;
    let scale = DType::from(args.scale_format);
    let layers = match &args.manifest {
        Some(path) => manifest::load(path)?
            .into_iter()
            .map(|l| quantize_one(Some(l.name), &l.weights, &l.quantized, &cfg, scale))
            .collect::<Result<Vec<_>>>()?,
        None => {
            let input = args.input.as_deref().expect("clap enforces --input");
            let output = args.output.as_deref().expect("clap enforces --output");
            vec![quantize_one(None, input, output, &cfg, scale)?]
        }
    };
    let report = QuantizeReport {
        schema_version: SCHEMA_VERSION,
        layers,
    };
    match &args.report {
        Some(path) => {
            let mut json = serde_json::to_vec_pretty(&report)?;
            json.push(b'\n');
            write_file(path, &json)
        }
        None => print_json(&report),
    }
}

pub fn dequantize(args: DequantizeArgs) -> Result<()> {
    let (q, _) = read_layer(&args.input)?;
    let bytes = write_tensor(&reconstruct(&q), args.dtype.into())?;
    write_file(&args.output, &bytes)
}

fn stats_one(weights: &Path, quantized: &Path) -> Result<StatsReport> {
    let w = read_weights(weights)?;
    let (q, dtype) = read_layer(quantized)?;
    let layout = q.layout();
    if (layout.n(), layout.d()) != w.shape() {
        return Err(ptqtp_core::Error::Dimension(format!(
            "weights are {}x{} but the quantized layer is {}x{}",
            w.rows(),
            w.cols(),
            layout.n(),
            layout.d()
        ))
        .into());
    }
    Ok(StatsReport {
        schema_version: SCHEMA_VERSION,
        weights: display(weights),
        quantized: display(quantized),
        scale_format: dtype_name(dtype),
        iterations: q.meta.iterations,
        final_error: q.meta.final_error,
        figures: LayerFigures::compute(&w, &q)?,
    })
}

pub fn stats(args: StatsArgs) -> Result<()> {
    let Some(path) = &args.manifest else {
        let weights = args.weights.as_deref().expect("clap enforces --weights");
        let quantized = args
            .quantized
            .as_deref()
            .expect("clap enforces --quantized");
        return print_json(&stats_one(weights, quantized)?);
    };
    let layers = manifest::load(path)?
        .into_iter()
        .map(|l| {
            Ok(NamedStats {
                stats: stats_one(&l.weights, &l.quantized)?,
                name: l.name,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (mut err_sq, mut norm_sq, mut params, mut memory_bits, mut fp16_bits) = (0.0, 0.0, 0, 0, 0);
    for l in &layers {
        let f = &l.stats.figures;
        err_sq += f.error * f.error;
        norm_sq += f.weight_norm * f.weight_norm;
        params += (f.n * f.d) as u64;
        memory_bits += f.memory_bits;
        fp16_bits += f.fp16_bits;
    }
    let error = f64::sqrt(err_sq);
    let total = ManifestTotals {
        layers: layers.len(),
        params,
        error,
        relative_error: relative(error, f64::sqrt(norm_sq)),
        memory_bits,
        fp16_bits,
        compression_ratio: if memory_bits == 0 {
            0.0
        } else {
            fp16_bits as f64 / memory_bits as f64
        },
    };
    print_json(&ManifestStats {
        schema_version: SCHEMA_VERSION,
        manifest: display(path),
        layers,
        total,
    })
}

pub const SWEEP_HEADER: &str = "param,value,iterations,final_error,wall_seconds";

pub fn sweep(args: SweepArgs) -> Result<()> {
    let base = args.decompose.config();
    base.validate()?;
    // surface bad values as usage errors before touching the input
    for &v in &args.values {
        args.param.apply(&base, v)?;
    }
    let w = read_weights(&args.input)?;
    let rows = run_sweep(&w, &base, args.param, &args.values, args.repeats)?;
    let mut csv = String::from(SWEEP_HEADER);
    csv.push('\n');
    for r in rows {
        csv.push_str(&format!(
            "{},{:e},{},{:e},{:e}\n",
            args.param, r.value, r.iterations, r.final_error, r.wall_seconds
        ));
    }
    write_file(&args.csv, csv.as_bytes())
}

pub fn bench(args: BenchArgs) -> Result<()> {
    #[derive(Serialize)]
    struct Out {
        schema_version: u32,
        #[serde(flatten)]
        report: ptqtp_core::BenchReport,
    }
    let report = bench_matvec(args.n, args.d, args.group, args.reps)?;
    print_json(&Out {
        schema_version: SCHEMA_VERSION,
        report,
    })
}

#[derive(Debug, Serialize)]
struct OracleSummary {
    schema_version: u32,
    rows: usize,
    len: usize,
    seed: u64,
    violations: usize,
    /// Decomposer objective minus oracle optimum; null when no rows ran.
    min_gap: Option<f64>,
    mean_gap: Option<f64>,
    max_gap: Option<f64>,
    /// Rows where the decomposer reached the oracle optimum within 1e-9.
    optimal_rows: usize,
}

/// Decomposer objective minus the exhaustive optimum for one row, both at the
/// decomposer's final λ.
pub fn oracle_gap(row: &[f64]) -> Result<f64> {
    let w = WeightMatrix::new(1, row.len(), row.to_vec())?;
    let cfg = DecomposeConfig::default().with_group_size(row.len());
    let (q, trace) = decompose(&w, &cfg)?;
    let lambda = trace.final_lambdas[0];
    let ours = regularized_objective(
        row,
        q.plane1().row(0),
        q.plane2().row(0),
        q.scales(0),
        lambda,
    );
    let best = global_optimum_row(row, lambda)?;
    Ok(ours - best.objective)
}

pub fn oracle_check(args: OracleArgs) -> Result<bool> {
    if args.len == 0 || args.len > MAX_ORACLE_LEN {
        return Err(UsageError(format!(
            "--len must be in 1..={MAX_ORACLE_LEN}, got {}",
            args.len
        ))
        .into());
    }
    let mut gaps = Vec::with_capacity(args.rows);
    for r in 0..args.rows {
        let row = synth::gaussian_vec(args.len, args.seed.wrapping_add(r as u64));
        gaps.push(oracle_gap(&row)?);
    }
    let violations = gaps.iter().filter(|&&g| g < -1e-9).count();
    let summary = OracleSummary {
        schema_version: SCHEMA_VERSION,
        rows: args.rows,
        len: args.len,
        seed: args.seed,
        violations,
        min_gap: gaps.iter().copied().reduce(f64::min),
        mean_gap: (!gaps.is_empty()).then(|| gaps.iter().sum::<f64>() / gaps.len() as f64),
        max_gap: gaps.iter().copied().reduce(f64::max),
        optimal_rows: gaps.iter().filter(|g| g.abs() <= 1e-9).count(),
    };
    print_json(&summary)?;
    Ok(violations == 0)
}

pub fn gen(args: GenArgs) -> Result<()> {
    let (n, d) = (args.shape[0], args.shape[1]);
    if n == 0 || d == 0 {
        return Err(UsageError(format!("--shape must be positive, got {n} {d}")).into());
    }
    let w = match args.dist {
        Dist::Zeros => synth::zeros(n, d),
        Dist::Gaussian => synth::gaussian(n, d, args.seed),
        Dist::Representable => synth::representable(n, d, args.seed),
    };
    write_file(&args.out, &write_tensor(&w, args.dtype.into())?)
}

pub fn memory(args: MemoryArgs) -> Result<()> {
    #[derive(Serialize)]
    struct Method {
        method: String,
        bits: u64,
        gb: f64,
        gib: f64,
        compression_ratio: f64,
    }
    #[derive(Serialize)]
    struct Out {
        schema_version: u32,
        model: String,
        group: u64,
        params: u64,
        methods: Vec<Method>,
    }
    let (model, shapes) = match (&args.preset, &args.shape) {
        (Some(name), _) => (
            name.clone(),
            preset_shapes(name).ok_or_else(|| {
                UsageError(format!(
                    "unknown preset {name:?}; expected llama-7b or llama-13b"
                ))
            })?,
        ),
        (None, Some(s)) => (
            format!("{}x{}", s[0], s[1]),
            vec![LayerShape::linear("matrix", s[0], s[1], 1)],
        ),
        (None, None) => unreachable!("clap requires --preset or --shape"),
    };
    let fp16 = model_memory_report(&shapes, MemoryMethod::Fp16)?;
    let methods = [
        MemoryMethod::Fp16,
        MemoryMethod::Ptqtp,
        MemoryMethod::PtqtpGrouped { group: args.group },
    ]
    .into_iter()
    .map(|m| {
        let r = model_memory_report(&shapes, m)?;
        Ok(Method {
            method: m.to_string(),
            bits: r.bits,
            gb: r.gb(),
            gib: r.gib(),
            compression_ratio: fp16.bits as f64 / r.bits as f64,
        })
    })
    .collect::<Result<Vec<_>>>()?;
    print_json(&Out {
        schema_version: SCHEMA_VERSION,
        model,
        group: args.group,
        params: shapes.iter().map(LayerShape::params).sum(),
        methods,
    })
}
