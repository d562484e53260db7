//! Subcommand bodies. Each returns its artifacts in memory; nothing touches
//! the disk until the whole experiment has succeeded.

use plcml::autoencoder::{ae_train, evaluate_ser, pam_required_ebn0, required_ebn0};
use plcml::clustering::{assignments_csv, cluster_summary_csv, noise_cluster};
use plcml::diagnostics::{build_diag_dataset, class_subset_experiment, evaluate_diag, summary_table, train_diag, AnomalyClass, DiagConfig, DiagTableRow, LoadMode};
use plcml::features::FEATURE_NAMES;
use plcml::gan::{compare_sets, gan_train, responses_csv, ChannelCorpus};
use plcml::io::fmt17;
use plcml::routing::nn::{eval_capacity_gain, evaluate_match, gain_csv, match_csv, nn_route_train, total_match};
use plcml::routing::{build_link_table, capacity_regression, route_dataset, CapacitySample, Deployment, DeploymentConfig, LinkTable, RoutingProblem};
use plcml::seed;
use rand::Rng as _;
use serde_json::json;

use crate::config::ExperimentConfig;

pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

fn text(name: &str, s: String) -> Artifact {
    Artifact { name: name.to_string(), bytes: s.into_bytes() }
}

fn pretty(name: &str, v: &serde_json::Value) -> Artifact {
    text(name, serde_json::to_string_pretty(v).expect("json value") + "\n")
}

fn corpus(cfg: &ExperimentConfig) -> plcml::Result<ChannelCorpus> {
    ChannelCorpus::synthesize(cfg.channel.n_responses, &cfg.channel.multipath, cfg.channel.seed)
}

pub fn channel_gen(cfg: &ExperimentConfig) -> plcml::Result<Vec<Artifact>> {
    let c = corpus(cfg)?;
    let (mean, std) = c.bin_stats();
    let mut stats = String::from("freq_hz,mean_db,std_db\n");
    for ((f, m), s) in c.grid.freqs().iter().zip(&mean).zip(&std) {
        stats.push_str(&format!("{},{},{}\n", fmt17(*f), fmt17(*m), fmt17(*s)));
    }
    Ok(vec![text("channels.csv", c.to_csv()), text("channel_stats.csv", stats)])
}

pub fn noise_cluster_run(cfg: &ExperimentConfig) -> plcml::Result<Vec<Artifact>> {
    let r = noise_cluster(&cfg.noise_cluster)?;
    let mut scores = String::from("width,height,davies_bouldin\n");
    for (w, h, db) in &r.selection.scores {
        scores.push_str(&format!("{w},{h},{}\n", fmt17(*db)));
    }
    let mut labels = String::from("slot_index,planted_class\n");
    for (i, l) in r.labels.iter().enumerate() {
        labels.push_str(&format!("{i},{l}\n"));
    }
    let report = json!({
        "slots": r.labels.len(),
        "degenerate_slots": r.features.degenerate.iter().filter(|d| **d).count(),
        "som_width": r.selection.grid.width,
        "som_height": r.selection.grid.height,
        "purity": r.purity,
    });
    Ok(vec![
        text("features.csv", r.features.to_csv()),
        text("assignments.csv", assignments_csv(&r.selection.assignments)),
        text("planted_labels.csv", labels),
        text("cluster_summary.csv", cluster_summary_csv(&r.features.values, &r.selection.assignments, &FEATURE_NAMES)),
        text("som_scores.csv", scores),
        pretty("report.json", &report),
    ])
}

pub fn gan_train_run(cfg: &ExperimentConfig) -> plcml::Result<Vec<Artifact>> {
    let c = corpus(cfg)?;
    let (gan, history) = gan_train(&c, &cfg.gan.model)?;
    let generated = gan.generate(cfg.gan.eval_samples, seed::derive(cfg.gan.model.seed, "evaluation"))?;
    let mp = &cfg.channel.multipath;
    let report = compare_sets(&generated, &c.responses, (mp.min_db, mp.max_db), cfg.gan.tolerance_db);
    let mut hist = String::from("epoch,d_loss,g_loss\n");
    for (e, (d, g)) in history.d_loss.iter().zip(&history.g_loss).enumerate() {
        hist.push_str(&format!("{e},{},{}\n", fmt17(*d), fmt17(*g)));
    }
    let n_bins = report.mean_error_db.len();
    let summary = json!({
        "bins": n_bins,
        "bins_within_tolerance": n_bins - report.flagged_bins,
        "tolerance_db": report.tolerance_db,
        "in_range_fraction": report.in_range_fraction,
        "avg_gain_ks": report.avg_gain_ks,
        "mode_collapse": history.mode_collapse,
        "mean_error_db": report.mean_error_db,
        "std_ratio": report.std_ratio,
    });
    Ok(vec![
        text("generator.json", gan.generator.to_json()),
        text("discriminator.json", gan.discriminator.to_json()),
        text("history.csv", hist),
        text("generated.csv", responses_csv(&generated, &c.grid)),
        pretty("report.json", &summary),
    ])
}

pub fn ae_ser_run(cfg: &ExperimentConfig) -> plcml::Result<Vec<Artifact>> {
    let a = &cfg.ae_ser;
    let sys = ae_train(&a.autoencoder)?;
    let curve = evaluate_ser(&sys, &a.ebn0_db, a.trials, seed::derive(a.autoencoder.seed, "ser"))?;
    let m = a.autoencoder.m;
    let report = json!({
        "m": m,
        "n": a.autoencoder.n,
        "required_ebn0_db_at_1e-2": required_ebn0(&curve, 1e-2),
        "pam_required_ebn0_db_at_1e-2": pam_required_ebn0(m, 1e-2),
        "final_loss": sys.loss_history.last(),
    });
    Ok(vec![
        text("ser.csv", curve.to_csv(m)),
        text("constellation.csv", sys.constellation_csv()?),
        text("encoder.json", sys.encoder.to_json()),
        text("decoder.json", sys.decoder.to_json()),
        pretty("report.json", &report),
    ])
}

fn gain_cases(cfg: &ExperimentConfig) -> plcml::Result<(Vec<(Deployment, LinkTable)>, Vec<Vec<RoutingProblem>>)> {
    let r = &cfg.route;
    let mut cases = Vec::new();
    let mut problems = Vec::new();
    let (c0, c1) = r.test.min_capacity_range;
    for (i, &density) in r.gain_densities.iter().enumerate() {
        for t in 0..r.gain_topologies_per_density {
            let idx = (i * r.gain_topologies_per_density + t) as u64;
            let mut rng = seed::rng(seed::derive_indexed(r.seed, "gain-deployment", idx));
            let dep_cfg = DeploymentConfig { n_nodes: r.gain_n_nodes, density, load_ohms: r.test.load_ohms, cable: r.test.cable };
            let dep = Deployment::random(&dep_cfg, rng.random())?;
            let table = build_link_table(&dep, &r.test.link)?;
            let n = r.gain_n_nodes;
            let list = (0..r.gain_problems)
                .map(|_| {
                    let source = rng.random_range(0..n);
                    let dest = (source + rng.random_range(1..n)) % n;
                    let min_capacity = if c0 == c1 { c0 } else { rng.random_range(c0..c1) };
                    RoutingProblem { source, dest, min_capacity }
                })
                .collect();
            cases.push((dep, table));
            problems.push(list);
        }
    }
    Ok((cases, problems))
}

pub fn route_sim(cfg: &ExperimentConfig) -> plcml::Result<Vec<Artifact>> {
    let r = &cfg.route;
    let train = route_dataset(&r.train, seed::derive(r.seed, "train"))?;
    let test = route_dataset(&r.test, seed::derive(r.seed, "test"))?;
    let (model, history) = nn_route_train(&train, &r.router)?;
    let groups = evaluate_match(&model, &test, r.match_bucket)?;
    let total = total_match(&groups);
    let (cases, problems) = gain_cases(cfg)?;
    let gain = eval_capacity_gain(&model, &cases, &problems)?;
    let samples: Vec<CapacitySample> = cases
        .iter()
        .flat_map(|(dep, table)| {
            let n = table.n_nodes();
            (0..n).flat_map(move |i| {
                (i + 1..n).map(move |j| CapacitySample { density: dep.density, distance: table.backbone_distance(i, j), capacity: table.capacity(i, j) })
            })
        })
        .collect();
    let surface = capacity_regression(&samples, r.regression_bins.0, r.regression_bins.1)?;
    let report = json!({
        "train_problems": train.samples.len(),
        "train_infeasible": train.infeasible,
        "train_router_histogram": train.router_histogram(),
        "test_problems": test.samples.len(),
        "test_router_histogram": test.router_histogram(),
        "match_fraction": total.fraction(),
        "router_count_match_fraction": total.count_fraction(),
        "invalid_paths": total.invalid,
        "final_step_loss": history.step_loss.last(),
        "final_count_loss": history.count_loss.last(),
    });
    Ok(vec![
        text("train_dataset.csv", train.to_csv()),
        text("test_dataset.csv", test.to_csv()),
        text("router.json", model.to_json()),
        text("match.csv", match_csv(&groups, train.samples.len())),
        text("gain.csv", gain_csv(&gain)),
        text("capacity_surface.csv", surface.to_csv()),
        pretty("report.json", &report),
    ])
}

fn mode_tag(m: LoadMode) -> &'static str {
    match m {
        LoadMode::Constant2kOhm => "constant",
        LoadMode::RandomVariable => "variable",
    }
}

pub fn diagnose(cfg: &ExperimentConfig) -> plcml::Result<Vec<Artifact>> {
    let mut out = Vec::new();
    let mut rows = Vec::new();
    let mut report = serde_json::Map::new();
    let three = [AnomalyClass::Unperturbed, AnomalyClass::LoadImpedanceChange, AnomalyClass::ConcentratedFault];
    for &mode in &cfg.diagnose.load_modes {
        let dc = DiagConfig { load_mode: mode, ..cfg.diagnose.config.clone() };
        let tag = mode_tag(mode);
        let data = build_diag_dataset(&dc)?;
        let train_seed = seed::derive(dc.seed, "train");
        let (model, split) = train_diag(&data, &dc, train_seed)?;
        let all = evaluate_diag(&model, &data, &split.test)?;
        let sub = class_subset_experiment(&data, &three, &dc, train_seed)?;
        rows.push(DiagTableRow { load_mode: mode, fault_detection: all.detection_accuracy, all_classes: all.accuracy, three_classes: sub.accuracy });
        report.insert(
            tag.to_string(),
            json!({
                "resampled_realizations": data.resampled,
                "fault_detection": all.detection_accuracy,
                "all_classes": all.accuracy,
                "three_classes": sub.accuracy,
                "per_class": all.per_class.iter().map(|(c, a)| json!({"class": c.index(), "accuracy": a})).collect::<Vec<_>>(),
            }),
        );
        out.push(text(&format!("dataset_{tag}.csv"), data.to_csv()));
        out.push(text(&format!("confusion4_{tag}.csv"), all.confusion.to_csv()));
        out.push(text(&format!("confusion3_{tag}.csv"), sub.confusion.to_csv()));
    }
    out.push(text("summary.txt", summary_table(&rows)));
    out.push(pretty("report.json", &serde_json::Value::Object(report)));
    Ok(out)
}
