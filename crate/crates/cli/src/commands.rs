use lsicert::coupling::{
    build_coupling, certify_lsi, mean_field_bound_check, spectrum, CertificateStatus,
    CouplingMatrix, SpectrumSummary,
};
use lsicert::dynamics::{relaxation_study, SpinConfiguration, StudySpec};
use lsicert::goe::sk_certification_sweep;
use lsicert::oracle::{
    duplication_inequality_check, mixture_identity_check, ordering_check, random_coupling,
    standard_duplication_fields, MIXTURE_MAX_SITES,
};
use lsicert::renorm::{
    gaussian_identity_check, hessian_lower_bound_check, positive_shift, rows_to_csv,
    split_covariance, standard_psi_grid, Potential, GAUSSIAN_CHECK_MAX_DIM,
};
use lsicert::rng::{self, derive_seed};
use lsicert::singlespin::{
    single_spin_lsi_default, standard_directions, variance_bound_check, DensityTable,
    SingleSpinModel,
};
use rand::Rng as _;
use serde_json::json;

use crate::config::RunConfig;
use crate::output::{csv_table, opt, Report, Table};
use crate::Failure;

/// Largest co-shift used to move the coupling spectrum off zero.
pub const MAX_CO_SHIFT: f64 = 0.05;

fn coupling(cfg: &RunConfig) -> Result<CouplingMatrix, Failure> {
    let spec = cfg.model.as_ref().ok_or_else(|| {
        Failure::Error("no model: pass a matrix file or set \"model\" in the config".into())
    })?;
    Ok(build_coupling(spec)?)
}

fn spectrum_summary(m: &CouplingMatrix) -> Result<SpectrumSummary, Failure> {
    let mut s = spectrum(m)?;
    s.eigenvalues = None;
    Ok(s)
}

pub fn certify(cfg: &RunConfig) -> Result<Report, Failure> {
    let m = coupling(cfg)?;
    let n = cfg.spin_dimension();
    let gamma = single_spin_lsi_default(n, cfg.gamma)?;
    let s = spectrum_summary(&m)?;
    let cert = certify_lsi(&m, n, gamma)?;
    let mean_field = mean_field_bound_check(&m, n);
    let status = match cert.status {
        CertificateStatus::Certified => "certified",
        CertificateStatus::FailedSpectralCondition => "failed-spectral-condition",
    };
    let row = vec![
        m.size().to_string(),
        s.lambda_min.to_string(),
        s.lambda_max.to_string(),
        cert.effective_norm.to_string(),
        n.to_string(),
        gamma.to_string(),
        opt(cert.certified_constant),
        opt(cert.certified_lsi_rate),
        status.to_string(),
        opt(cert.failure_margin),
        mean_field.row_sup_norm.to_string(),
        mean_field.implies_condition.to_string(),
    ];
    let csv = csv_table(
        &[
            "size",
            "lambda_min",
            "lambda_max",
            "effective_norm",
            "spin_dimension",
            "gamma",
            "certified_constant",
            "certified_lsi_rate",
            "status",
            "failure_margin",
            "row_sup_norm",
            "mean_field_implies_condition",
        ],
        [row],
    )?;
    Ok(Report {
        command: "certify",
        document: json!({
            "command": "certify",
            "config": cfg,
            "size": m.size(),
            "spectrum": s,
            "certificate": cert,
            "meanField": mean_field,
        }),
        tables: vec![Table {
            name: "certify".into(),
            csv,
        }],
        certified: cert.is_certified(),
    })
}

pub fn renormalize(cfg: &RunConfig) -> Result<Report, Failure> {
    let m = coupling(cfg)?;
    let n = cfg.spin_dimension();
    let span = spectrum(&m)?.span();
    // Shift the spectrum to [δ, span + δ] and put c the same distance above the top.
    let (delta, c) = match cfg.c {
        Some(c) => ((c - span) / 2.0, c),
        None => {
            if span >= n as f64 {
                return Err(Failure::Spectral(format!(
                    "spectrum width {span} is not below n = {n}; no admissible c exists"
                )));
            }
            let delta = MAX_CO_SHIFT.min((n as f64 - span) / 4.0);
            (delta, span + 2.0 * delta)
        }
    };
    let (shifted, shift) = positive_shift(&m, delta)?;
    let single = SingleSpinModel::sphere(n, cfg.gamma)?;
    let model = split_covariance(&shifted, c, n)?;
    let hessian = hessian_lower_bound_check(&single, c, &standard_psi_grid(n))?;
    let gaussian = if m.size() * n <= GAUSSIAN_CHECK_MAX_DIM {
        let samples: Vec<Vec<f64>> = (0..cfg.renormalize.sigma_samples)
            .map(|k| {
                let mut r = rng::stream(cfg.seed, "renormalize-sigma", k as u64);
                SpinConfiguration::random(m.size(), n, &mut r)
                    .values()
                    .to_vec()
            })
            .collect();
        Some(gaussian_identity_check(&shifted, c, n, &samples)?)
    } else {
        None
    };
    let potential = Potential::new(&single, c)?;
    let rows = potential.table_rows(
        cfg.renormalize.potential_radius,
        cfg.renormalize.potential_rows,
    )?;
    let pass = hessian.pass && model.round_trip_ok() && gaussian.as_ref().is_none_or(|g| g.pass);
    Ok(Report {
        command: "renormalize",
        document: json!({
            "command": "renormalize",
            "config": cfg,
            "size": m.size(),
            "spanOriginal": span,
            "shift": shift,
            "delta": delta,
            "c": c,
            "model": model,
            "hessian": hessian,
            "gaussianIdentity": gaussian,
            "potential": rows,
            "pass": pass,
        }),
        tables: vec![Table {
            name: "potential".into(),
            csv: rows_to_csv(&rows),
        }],
        // Failed checks are reported in the document; only the spectral condition sets the exit code.
        certified: true,
    })
}

pub fn spin_study(cfg: &RunConfig) -> Result<Report, Failure> {
    let model = match &cfg.spin_study.density {
        Some(path) => {
            if cfg.spin_dimension.is_some_and(|n| n != 1) {
                return Err(Failure::Error("density tables describe n = 1 spins".into()));
            }
            SingleSpinModel::general_bounded(&DensityTable::load(path)?)?
        }
        None => SingleSpinModel::sphere(cfg.spin_dimension(), cfg.gamma)?,
    };
    let n = model.spin_dimension();
    let mut grid = Vec::new();
    let mut labels = Vec::new();
    for (k, d) in standard_directions(n).into_iter().enumerate() {
        for &r in &cfg.spin_study.magnitudes {
            grid.push(d.iter().map(|x| x * r).collect::<Vec<f64>>());
            labels.push((k, r, d.clone()));
        }
    }
    let points = grid
        .iter()
        .map(|h| model.tilted_moments(h))
        .collect::<Result<Vec<_>, _>>()?;
    let bound = variance_bound_check(&model, &grid)?;
    let csv = csv_table(
        &[
            "direction",
            "magnitude",
            "longitudinal_mean",
            "longitudinal_variance",
            "transverse_variance",
            "max_directional_variance",
            "log_partition",
        ],
        points.iter().zip(&labels).map(|(p, (k, r, d))| {
            let along: f64 = p.mean.iter().zip(d).map(|(a, b)| a * b).sum();
            vec![
                k.to_string(),
                r.to_string(),
                along.to_string(),
                p.longitudinal_variance.to_string(),
                p.transverse_variance.to_string(),
                p.max_directional_variance().to_string(),
                p.log_partition.to_string(),
            ]
        }),
    )?;
    Ok(Report {
        command: "spin-study",
        document: json!({
            "command": "spin-study",
            "config": cfg,
            "spinDimension": n,
            "measure": model.kind(),
            "radius": model.radius(),
            "gamma": model.gamma().ok(),
            "varianceBound": bound,
            "points": points,
        }),
        tables: vec![Table {
            name: "spin-study".into(),
            csv,
        }],
        certified: true,
    })
}

pub fn simulate(cfg: &RunConfig) -> Result<Report, Failure> {
    let s = &cfg.study;
    let spec = StudySpec {
        family: s.family.clone(),
        sizes: s.sizes.clone(),
        betas: s.betas.clone(),
        seeds: s.seeds.clone(),
        spin_dimension: cfg.spin_dimension(),
        options: s.options.clone(),
        root_seed: cfg.seed,
        keep_traces: s.export_traces,
    };
    let table = relaxation_study(&spec)?;
    let mut tables = vec![Table {
        name: "simulate".into(),
        csv: table.to_csv(),
    }];
    for row in &table.rows {
        for trace in row.traces.iter().flatten() {
            tables.push(Table {
                name: format!(
                    "trace-N{}-beta{}-seed{}-{}",
                    row.size, row.beta, row.seed, trace.observable_name
                ),
                csv: trace.to_csv(),
            });
        }
    }
    Ok(Report {
        command: "simulate",
        document: json!({
            "command": "simulate",
            "config": cfg,
            "rows": table.rows,
        }),
        tables,
        certified: true,
    })
}

pub fn oracle(cfg: &RunConfig) -> Result<Report, Failure> {
    if cfg.spin_dimension() != 1 {
        return Err(Failure::Error(
            "the enumeration oracle covers Ising spins (n = 1) only".into(),
        ));
    }
    let gamma = single_spin_lsi_default(1, cfg.gamma)?;
    let o = &cfg.oracle;
    let corpus: Vec<CouplingMatrix> = match cfg.model {
        Some(_) => vec![coupling(cfg)?],
        None => {
            if o.max_size < 2 {
                return Err(Failure::Error("oracle.maxSize must be at least 2".into()));
            }
            (0..o.instances)
                .map(|k| {
                    let mut r = rng::stream(cfg.seed, "oracle-corpus", k as u64);
                    let size = r.random_range(2..=o.max_size);
                    let span = r.random_range(0.1..0.95);
                    random_coupling(size, span, &mut r)
                })
                .collect::<Result<_, _>>()?
        }
    };
    let mut instances = Vec::new();
    let mut rows = Vec::new();
    let (mut all_ordering, mut all_mixture) = (true, true);
    for (k, m) in corpus.iter().enumerate() {
        let mut ordering = ordering_check(
            m,
            gamma,
            o.restarts,
            derive_seed(cfg.seed, "oracle-lsi", k as u64),
        )?;
        if !o.dump_optimizer {
            ordering.lsi.best_f.clear();
        }
        let c = cfg.c.unwrap_or(0.5 * (1.0 + ordering.span));
        let mixture = if m.size() <= MIXTURE_MAX_SITES && ordering.span < c && c < 1.0 {
            Some(mixture_identity_check(
                m,
                c,
                o.mixture_samples,
                derive_seed(cfg.seed, "oracle-mixture", k as u64),
            )?)
        } else {
            None
        };
        all_ordering &= ordering.holds;
        all_mixture &= mixture.as_ref().is_none_or(|r| r.pass);
        rows.push(vec![
            k.to_string(),
            m.size().to_string(),
            ordering.span.to_string(),
            opt(ordering.certified_rate),
            ordering.lsi.rate.to_string(),
            ordering.lsi.search_minimum.to_string(),
            ordering.gap.to_string(),
            ordering.holds.to_string(),
            mixture
                .as_ref()
                .map(|r| r.pass.to_string())
                .unwrap_or_default(),
        ]);
        instances.push(json!({ "ordering": ordering, "mixture": mixture }));
    }
    let duplication = duplication_inequality_check(
        &standard_duplication_fields(),
        o.duplication_functions,
        derive_seed(cfg.seed, "oracle-duplication", 0),
    );
    let csv = csv_table(
        &[
            "instance",
            "size",
            "span",
            "certified_rate",
            "lsi_rate",
            "search_minimum",
            "gap",
            "ordering_holds",
            "mixture_pass",
        ],
        rows,
    )?;
    Ok(Report {
        command: "oracle",
        document: json!({
            "command": "oracle",
            "config": cfg,
            "instances": instances,
            "duplication": duplication,
            "allOrderingHold": all_ordering,
            "allMixturePass": all_mixture,
        }),
        tables: vec![Table {
            name: "oracle".into(),
            csv,
        }],
        certified: true,
    })
}

pub fn goe_sweep(cfg: &RunConfig) -> Result<Report, Failure> {
    let gamma = single_spin_lsi_default(1, cfg.gamma)?;
    let s = &cfg.sweep;
    let sweep = sk_certification_sweep(&s.betas, &s.sizes, s.samples_per_cell, cfg.seed, gamma)?;
    let mut tables = vec![Table {
        name: "goe-sweep".into(),
        csv: sweep.to_csv(),
    }];
    for e in &sweep.edge_statistics {
        tables.push(Table {
            name: format!("histogram-N{}", e.size),
            csv: e.histogram.to_csv(),
        });
    }
    Ok(Report {
        command: "goe-sweep",
        document: json!({
            "command": "goe-sweep",
            "config": cfg,
            "sweep": sweep,
        }),
        tables,
        certified: true,
    })
}
