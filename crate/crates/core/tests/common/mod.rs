//! Fixtures, brute-force oracles and a finite-difference harness shared by
//! the integration tests and the acceptance target.
#![allow(dead_code)]

use fairsin_core::encoders::{
    normalize_adjacency, Encoder, EncoderConfig, EncoderKind, IdentityHook, Mode, Propagation,
};
use fairsin_core::graph::{stratified_split, Edge, Split, DEFAULT_SPLIT_RATIOS};
use fairsin_core::metrics::{
    accuracy, demographic_parity, equal_opportunity, f1_binary, Predictions,
};
use fairsin_core::neutralizer::{
    hetero_mean, preprocess_fairsin_f, reweight_edges, Estimator, EstimatorConfig,
    NeutralizeConfig, Variant,
};
use fairsin_core::numerics::{ParamStore, SparseMatrix};
use fairsin_core::rng::{self, Rng};
use fairsin_core::synth::{generate, SynthConfig};
use fairsin_core::trainer::{train, Discriminator, Phase, TrainOutcome, Trainer};
use fairsin_core::{DenseMatrix, Graph, Tape, TrainConfig, Var};
use rand::Rng as _;

pub struct Instance {
    pub graph: Graph,
    pub edges: Vec<Edge>,
}

/// Random undirected graph with both sensitive groups and at least one
/// cross-group edge (`0 -- 1`).
pub fn random_instance(r: &mut Rng, n: usize, d: usize, p_edge: f64, weighted: bool) -> Instance {
    assert!(n >= 2);
    let features = DenseMatrix::from_fn(n, d, |_, _| r.random_range(-1.0..1.0));
    let mut sensitive: Vec<u8> = (0..n).map(|_| r.random_range(0..2)).collect();
    sensitive[0] = 0;
    sensitive[1] = 1;
    let labels: Vec<Option<u8>> = (0..n).map(|_| Some(r.random_range(0..2))).collect();
    let mut edges = vec![(0, 1, 1.0)];
    for u in 0..n {
        for v in u + 1..n {
            if (u, v) != (0, 1) && r.random_bool(p_edge) {
                let w = if weighted {
                    r.random_range(0.5..2.0)
                } else {
                    1.0
                };
                edges.push((u, v, w));
            }
        }
    }
    let graph = Graph::new(features, sensitive, labels, &edges).unwrap();
    Instance { graph, edges }
}

pub fn dense_adjacency(n: usize, edges: &[Edge]) -> Vec<Vec<f64>> {
    let mut a = vec![vec![0.0; n]; n];
    for &(u, v, w) in edges {
        a[u][v] = w;
        a[v][u] = w;
    }
    a
}

pub fn to_rows(m: &DenseMatrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

pub fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| {
            assert_eq!(x.len(), y.len());
            x.iter().zip(y).map(|(p, q)| (p - q).abs())
        })
        .fold(0.0, f64::max)
}

pub fn oracle_hetero_mean(
    adj: &[Vec<f64>],
    s: &[u8],
    h: &[Vec<f64>],
) -> (Vec<Vec<f64>>, Vec<bool>) {
    let n = adj.len();
    let d = h.first().map_or(0, Vec::len);
    let mut out = vec![vec![0.0; d]; n];
    let mut has = vec![false; n];
    for i in 0..n {
        let others: Vec<usize> = (0..n)
            .filter(|&j| adj[i][j] != 0.0 && s[j] != s[i])
            .collect();
        if others.is_empty() {
            continue;
        }
        has[i] = true;
        for c in 0..d {
            out[i][c] = others.iter().map(|&j| h[j][c]).sum::<f64>() / others.len() as f64;
        }
    }
    (out, has)
}

pub fn oracle_normalized(adj: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = adj.len();
    let mut a = adj.to_vec();
    for (i, row) in a.iter_mut().enumerate() {
        row[i] += 1.0;
    }
    let deg: Vec<f64> = a.iter().map(|row| row.iter().sum()).collect();
    (0..n)
        .map(|i| (0..n).map(|j| a[i][j] / (deg[i] * deg[j]).sqrt()).collect())
        .collect()
}

pub fn oracle_matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|row| {
            (0..m)
                .map(|c| row.iter().zip(b).map(|(x, brow)| x * brow[c]).sum())
                .collect()
        })
        .collect()
}

/// Accuracy, F1, DP and EO by explicit confusion-matrix counting.
pub fn oracle_metrics(y_hat: &[u8], y: &[u8], s: &[u8], idx: &[usize]) -> [f64; 4] {
    let mut cm = [[[0usize; 2]; 2]; 2]; // [s][y][y_hat]
    for &i in idx {
        cm[s[i] as usize][y[i] as usize][y_hat[i] as usize] += 1;
    }
    let total = idx.len() as f64;
    let sum = |f: &dyn Fn(usize, usize, usize) -> bool| -> f64 {
        let mut c = 0;
        for g in 0..2 {
            for t in 0..2 {
                for p in 0..2 {
                    if f(g, t, p) {
                        c += cm[g][t][p];
                    }
                }
            }
        }
        c as f64
    };
    let acc = sum(&|_, t, p| t == p) / total;
    let tp = sum(&|_, t, p| t == 1 && p == 1);
    let fp = sum(&|_, t, p| t == 0 && p == 1);
    let fneg = sum(&|_, t, p| t == 1 && p == 0);
    let f1 = if tp == 0.0 {
        0.0
    } else {
        2.0 * tp / (2.0 * tp + fp + fneg)
    };
    let rate = |g: usize| sum(&|gg, _, p| gg == g && p == 1) / sum(&|gg, _, _| gg == g);
    let tpr = |g: usize| {
        sum(&|gg, t, p| gg == g && t == 1 && p == 1) / sum(&|gg, t, _| gg == g && t == 1)
    };
    [acc, f1, (rate(0) - rate(1)).abs(), (tpr(0) - tpr(1)).abs()]
}

#[derive(Clone, Copy, Debug, Default)]
pub struct OracleReport {
    pub instances: usize,
    pub hetero_mean: f64,
    pub spmm: f64,
    pub normalize: f64,
    pub metrics: f64,
}

impl OracleReport {
    pub fn worst(&self) -> f64 {
        [self.hetero_mean, self.spmm, self.normalize, self.metrics]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

/// Compares every kernel with its brute-force oracle on `instances` random
/// graphs of 2..=64 nodes and returns the largest deviation per kernel.
pub fn oracle_suite(instances: usize, seed: u64) -> OracleReport {
    let mut rep = OracleReport {
        instances,
        ..OracleReport::default()
    };
    for t in 0..instances {
        let mut r = rng::stream(seed, "oracle-instance", t as u64);
        let n = r.random_range(2..=64);
        let d = r.random_range(1..=6);
        let p_edge = r.random_range(0.02..0.5);
        let weighted = r.random_bool(0.5);
        let inst = random_instance(&mut r, n, d, p_edge, weighted);
        let g = &inst.graph;
        let adj = dense_adjacency(n, &inst.edges);

        let h = DenseMatrix::from_fn(n, d, |_, _| r.random_range(-3.0..3.0));
        let got = hetero_mean(g, &h).unwrap();
        let (want, has) = oracle_hetero_mean(&adj, g.sensitive(), &to_rows(&h));
        assert_eq!(got.has_target, has, "instance {t}: eligibility differs");
        rep.hetero_mean = rep
            .hetero_mean
            .max(max_abs_diff(&to_rows(&got.targets), &want));

        let norm = normalize_adjacency(g);
        rep.normalize = rep.normalize.max(max_abs_diff(
            &to_rows(&norm.to_dense()),
            &oracle_normalized(&adj),
        ));

        let b = DenseMatrix::from_fn(n, d, |_, _| r.random_range(-2.0..2.0));
        let sp_out = to_rows(&g.adjacency().spmm(&b).unwrap());
        rep.spmm = rep
            .spmm
            .max(max_abs_diff(&sp_out, &oracle_matmul(&adj, &to_rows(&b))));
        let cols = r.random_range(1..=64);
        let m = random_sparse(&mut r, n, cols);
        let c = DenseMatrix::from_fn(m.cols(), d, |_, _| r.random_range(-2.0..2.0));
        let got = to_rows(&m.spmm(&c).unwrap());
        rep.spmm = rep.spmm.max(max_abs_diff(
            &got,
            &oracle_matmul(&to_rows(&m.to_dense()), &to_rows(&c)),
        ));

        let y_hat: Vec<u8> = (0..n).map(|_| r.random_range(0..2)).collect();
        let mut y = g.labels().to_vec();
        let s = g.sensitive().to_vec();
        let mut idx: Vec<usize> = (0..n).filter(|_| r.random_bool(0.7)).collect();
        idx.extend([0, 1]);
        idx.sort_unstable();
        idx.dedup();
        // both groups need a positive for EO
        y[0] = 1;
        y[1] = 1;
        let p = Predictions::new(y_hat.clone(), y.clone(), s.clone(), idx.clone()).unwrap();
        let got = [
            accuracy(&p),
            f1_binary(&p),
            demographic_parity(&p).unwrap(),
            equal_opportunity(&p).unwrap(),
        ];
        let want = oracle_metrics(&y_hat, &y, &s, &idx);
        let err = got
            .iter()
            .zip(&want)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        rep.metrics = rep.metrics.max(err);
    }
    rep
}

/// Random `rows x cols` sparse matrix from triplets (duplicates allowed).
pub fn random_sparse(r: &mut Rng, rows: usize, cols: usize) -> SparseMatrix {
    let nnz = r.random_range(0..=rows * cols / 2 + 1);
    let triplets: Vec<(usize, usize, f64)> = (0..nnz)
        .map(|_| {
            (
                r.random_range(0..rows),
                r.random_range(0..cols),
                r.random_range(-2.0..2.0),
            )
        })
        .collect();
    SparseMatrix::from_triplets(rows, cols, &triplets).unwrap()
}

/// Result of one finite-difference comparison.
#[derive(Clone, Copy, Debug, Default)]
pub struct GradCheck {
    pub max_rel: f64,
    pub checked: usize,
    /// Coordinates where the two one-sided slopes disagree, i.e. the step
    /// crosses a ReLU kink and the central difference is meaningless.
    pub kinks: usize,
}

impl GradCheck {
    pub fn merge(self, o: GradCheck) -> GradCheck {
        GradCheck {
            max_rel: self.max_rel.max(o.max_rel),
            checked: self.checked + o.checked,
            kinks: self.kinks + o.kinks,
        }
    }
}

pub const FD_STEP: f64 = 1e-5;

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Compares `analytic` with central differences of `eval` around `values`.
/// `eval` receives the perturbed parameter list.
pub fn compare_fd(
    values: &[DenseMatrix],
    analytic: &[DenseMatrix],
    mut eval: impl FnMut(&[DenseMatrix]) -> f64,
) -> GradCheck {
    let f0 = eval(values);
    let mut out = GradCheck::default();
    let mut work = values.to_vec();
    for (p, grad) in analytic.iter().enumerate() {
        for e in 0..grad.data().len() {
            let orig = work[p].data()[e];
            work[p].data_mut()[e] = orig + FD_STEP;
            let fp = eval(&work);
            work[p].data_mut()[e] = orig - FD_STEP;
            let fm = eval(&work);
            work[p].data_mut()[e] = orig;
            let central = (fp - fm) / (2.0 * FD_STEP);
            let fwd = (fp - f0) / FD_STEP;
            let bwd = (f0 - fm) / FD_STEP;
            if (fwd - bwd).abs() > 1e-3 + 1e-2 * central.abs() {
                out.kinks += 1;
                continue;
            }
            out.checked += 1;
            out.max_rel = out.max_rel.max(rel_err(grad.data()[e], central));
        }
    }
    out
}

/// Finite-difference check of a scalar function of freshly bound leaves.
pub fn grad_check(values: &[DenseMatrix], f: impl Fn(&mut Tape, &[Var]) -> Var) -> GradCheck {
    let run = |vals: &[DenseMatrix], trainable: bool| {
        let mut tape = Tape::new();
        let vars: Vec<Var> = vals
            .iter()
            .map(|v| tape.leaf(v.clone(), trainable))
            .collect();
        let root = f(&mut tape, &vars);
        (tape, vars, root)
    };
    let (tape, vars, root) = run(values, true);
    let grads = tape.backward(root).unwrap();
    let analytic: Vec<DenseMatrix> = vars
        .iter()
        .zip(values)
        .map(|(&v, val)| {
            grads
                .get(v)
                .cloned()
                .unwrap_or_else(|| DenseMatrix::zeros(val.rows(), val.cols()))
        })
        .collect();
    compare_fd(values, &analytic, |vals| {
        let (tape, _, root) = run(vals, false);
        tape.scalar(root)
    })
}

pub fn store_values(store: &ParamStore) -> Vec<DenseMatrix> {
    store.ids().map(|id| store.value(id).clone()).collect()
}

/// Adds uniform noise to every parameter. Zero-initialized biases can
/// leave ReLU pre-activations exactly at the kink, where no derivative
/// exists to check.
pub fn jitter(store: &mut ParamStore, r: &mut Rng) {
    for id in store.ids().collect::<Vec<_>>() {
        for v in store.value_mut(id).data_mut() {
            *v += r.random_range(-0.1..0.1);
        }
    }
}

fn tiny(r: &mut Rng) -> Instance {
    let n = r.random_range(4..=12);
    let d = r.random_range(1..=5);
    let weighted = r.random_bool(0.5);
    random_instance(r, n, d, 0.35, weighted)
}

/// Task loss of a randomly initialized encoder, differentiated with
/// respect to every encoder and head parameter.
pub fn check_encoder(kind: EncoderKind, seed: u64) -> GradCheck {
    let mut r = rng::stream(seed, "gradcheck-encoder", kind as u64);
    let inst = tiny(&mut r);
    let g = &inst.graph;
    let cfg = EncoderConfig {
        kind,
        n_layers: 2,
        hidden_dim: r.random_range(2..=4),
        dropout_p: 0.0,
    };
    let mut store = ParamStore::new();
    let enc = Encoder::new(&cfg, g.n_features(), &mut store, &mut r).unwrap();
    jitter(&mut store, &mut r);
    let prop = Propagation::new(g, kind);
    let labels: Vec<usize> = g.labels().iter().map(|&y| usize::from(y)).collect();
    let rows: Vec<usize> = (0..g.n_nodes()).collect();
    grad_check(&store_values(&store), |tape, vars| {
        let x = tape.constant(g.features().clone());
        let h = enc
            .encode(tape, vars, &prop, x, &mut IdentityHook, Mode::Eval)
            .unwrap();
        let logits = enc.classify(tape, vars, h).unwrap();
        tape.softmax_cross_entropy(logits, &labels, &rows).unwrap()
    })
}

/// Estimator loss against fixed heterogeneous-neighbor targets.
pub fn check_estimator(seed: u64) -> GradCheck {
    let mut r = rng::stream(seed, "gradcheck-estimator", 0);
    let inst = tiny(&mut r);
    let g = &inst.graph;
    let d = g.n_features();
    let mut est = Estimator::new(&[d], &mut r);
    jitter(est.store_mut(), &mut r);
    let h = DenseMatrix::from_fn(g.n_nodes(), d, |_, _| r.random_range(-1.0..1.0));
    let target = hetero_mean(g, &h).unwrap();
    grad_check(&store_values(est.store()), |tape, vars| {
        let hv = tape.constant(h.clone());
        est.loss(tape, vars, 0, hv, &target).unwrap()
    })
}

/// Discriminator BCE on fixed representations.
pub fn check_discriminator(seed: u64) -> GradCheck {
    let mut r = rng::stream(seed, "gradcheck-discriminator", 0);
    let n = r.random_range(4..=12);
    let w = r.random_range(1..=5);
    let mut d = Discriminator::new(w, &mut r);
    jitter(d.store_mut(), &mut r);
    let h = DenseMatrix::from_fn(n, w, |_, _| r.random_range(-1.0..1.0));
    let s: Vec<f64> = (0..n).map(|_| f64::from(r.random_range(0..2u8))).collect();
    let rows: Vec<usize> = (0..n).collect();
    grad_check(&store_values(d.store()), |tape, vars| {
        let hv = tape.constant(h.clone());
        d.loss(tape, vars, hv, &s, &rows).unwrap()
    })
}

/// Tiny graph whose fixed split satisfies every trainer precondition.
pub fn tiny_trainable(r: &mut Rng) -> (Graph, Split) {
    let n = 12;
    let d = r.random_range(2..=5);
    let features = DenseMatrix::from_fn(n, d, |_, _| r.random_range(-1.0..1.0));
    let sensitive: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
    let labels: Vec<Option<u8>> = (0..n).map(|i| Some(((i / 2) % 2) as u8)).collect();
    let mut edges = vec![(0, 1, 1.0)];
    for u in 0..n {
        for v in u + 1..n {
            if (u, v) != (0, 1) && r.random_bool(0.35) {
                edges.push((u, v, 1.0));
            }
        }
    }
    let g = Graph::new(features, sensitive, labels, &edges).unwrap();
    let split = Split {
        train: (0..6).collect(),
        val: vec![6, 7],
        test: (8..12).collect(),
        seed: 0,
    };
    (g, split)
}

fn composite_trainer(r: &mut Rng, kind: EncoderKind, n_layers: usize) -> Trainer {
    let (g, split) = tiny_trainable(r);
    let cfg = TrainConfig {
        epochs: 1,
        adv_weight: 0.7,
        encoder: EncoderConfig {
            kind,
            n_layers,
            hidden_dim: 3,
            dropout_p: 0.0,
        },
        neutralize: NeutralizeConfig {
            delta: r.random_range(0.5..2.0),
            per_layer_delta: None,
            variant: Variant::Full,
        },
        seed: r.random(),
        ..TrainConfig::default()
    };
    let mut t = Trainer::new(&g, &split, &cfg).unwrap();
    // a couple of updates move parameters away from their initialization
    t.epoch().unwrap();
    t.epoch().unwrap();
    let m = t.model_mut();
    jitter(&mut m.params, r);
    jitter(m.estimator.as_mut().unwrap().store_mut(), r);
    jitter(m.discriminator.as_mut().unwrap().store_mut(), r);
    t
}

/// Encoder-step objective `L_T - adv L_D` through the neutralized layers,
/// differentiated with respect to encoder and head parameters.
pub fn check_composite_encoder(kind: EncoderKind, seed: u64) -> GradCheck {
    let mut r = rng::stream(seed, "gradcheck-composite-encoder", kind as u64);
    let mut t = composite_trainer(&mut r, kind, 2);
    let obj = t.objective(Phase::Encoder, Mode::Eval).unwrap();
    let grads = obj.tape.backward(obj.total.unwrap()).unwrap();
    let analytic: Vec<DenseMatrix> = obj
        .encoder_vars
        .iter()
        .map(|&v| {
            let val = obj.tape.value(v);
            grads
                .get(v)
                .cloned()
                .unwrap_or_else(|| DenseMatrix::zeros(val.rows(), val.cols()))
        })
        .collect();
    drop(obj);
    let values = store_values(&t.model().params);
    compare_fd(&values, &analytic, |vals| {
        let store = &mut t.model_mut().params;
        for (id, v) in store.ids().collect::<Vec<_>>().into_iter().zip(vals) {
            *store.value_mut(id) = v.clone();
        }
        let obj = t.objective(Phase::Encoder, Mode::Eval).unwrap();
        obj.tape.scalar(obj.total.unwrap())
    })
}

/// Estimator-step objective `sum_k L_F^k - adv L_D`. Targets are constants
/// of the recorded pass, so only estimator parameters that do not feed a
/// later layer's target are perturbed: all of them for one layer, the last
/// layer's for deeper encoders.
pub fn check_composite_estimator(kind: EncoderKind, n_layers: usize, seed: u64) -> GradCheck {
    let mut r = rng::stream(
        seed,
        "gradcheck-composite-estimator",
        kind as u64 * 8 + n_layers as u64,
    );
    let mut t = composite_trainer(&mut r, kind, n_layers);
    let obj = t.objective(Phase::Estimator, Mode::Eval).unwrap();
    let grads = obj.tape.backward(obj.total.unwrap()).unwrap();
    let store = t.model().estimator.as_ref().unwrap().store();
    let prefix = format!("estimator.{}.", n_layers - 1);
    let chosen: Vec<usize> = store
        .ids()
        .filter(|&id| store.name(id).starts_with(&prefix))
        .map(|id| id.index())
        .collect();
    let analytic: Vec<DenseMatrix> = chosen
        .iter()
        .map(|&i| {
            let v = obj.estimator_vars[i];
            let val = obj.tape.value(v);
            grads
                .get(v)
                .cloned()
                .unwrap_or_else(|| DenseMatrix::zeros(val.rows(), val.cols()))
        })
        .collect();
    drop(obj);
    let all = store_values(store);
    let values: Vec<DenseMatrix> = chosen.iter().map(|&i| all[i].clone()).collect();
    compare_fd(&values, &analytic, |vals| {
        let est = t.model_mut().estimator.as_mut().unwrap().store_mut();
        let ids: Vec<_> = est.ids().collect();
        for (&i, v) in chosen.iter().zip(vals) {
            *est.value_mut(ids[i]) = v.clone();
        }
        let obj = t.objective(Phase::Estimator, Mode::Eval).unwrap();
        obj.tape.scalar(obj.total.unwrap())
    })
}

/// Every gradient family over `instances` random tiny instances, labelled.
pub fn gradient_suite(instances: usize) -> Vec<(String, GradCheck)> {
    let mut out = Vec::new();
    let fold = |f: &dyn Fn(u64) -> GradCheck| {
        (0..instances as u64)
            .map(f)
            .fold(GradCheck::default(), GradCheck::merge)
    };
    for kind in EncoderKind::ALL {
        out.push((format!("encoder {kind}"), fold(&|s| check_encoder(kind, s))));
    }
    out.push(("estimator".into(), fold(&check_estimator)));
    out.push(("discriminator".into(), fold(&check_discriminator)));
    for kind in EncoderKind::ALL {
        out.push((
            format!("objective L_T - adv L_D ({kind})"),
            fold(&|s| check_composite_encoder(kind, s)),
        ));
        out.push((
            format!("objective sum L_F - adv L_D ({kind}, 1 layer)"),
            fold(&|s| check_composite_estimator(kind, 1, s)),
        ));
        out.push((
            format!("objective sum L_F - adv L_D ({kind}, 2 layers)"),
            fold(&|s| check_composite_estimator(kind, 2, s)),
        ));
    }
    out
}

pub const GRAD_TOL: f64 = 1e-4;

/// A family passes when its worst relative error is below tolerance and
/// kink-crossing coordinates stay rare.
pub fn grad_family_ok(c: &GradCheck) -> bool {
    c.checked > 0 && c.max_rel < GRAD_TOL && c.kinks * 100 <= c.checked
}

/// Same trajectory and selected model, compared bitwise.
pub fn same_run(a: &TrainOutcome, b: &TrainOutcome) -> bool {
    let traj = |o: &TrainOutcome| -> Vec<(f64, f64)> {
        o.history.iter().map(|r| (r.l_t, r.val_acc)).collect()
    };
    traj(a) == traj(b)
        && a.checkpoint.epoch == b.checkpoint.epoch
        && a.checkpoint.test_metrics == b.checkpoint.test_metrics
        && a.checkpoint.model.params == b.checkpoint.model.params
}

#[derive(Clone, Copy, Debug)]
pub struct AblationReport {
    /// Full variant with both components disabled vs vanilla.
    pub flags_off: bool,
    /// Full variant with delta = 0 and adv_weight = 0 vs vanilla.
    pub zero_delta_no_adv: bool,
    pub g_dataset_unchanged: bool,
    pub f_dataset_unchanged: bool,
    pub g_run_is_vanilla: bool,
    pub f_run_is_vanilla: bool,
}

impl AblationReport {
    pub fn all(&self) -> bool {
        self.flags_off
            && self.zero_delta_no_adv
            && self.g_dataset_unchanged
            && self.f_dataset_unchanged
            && self.g_run_is_vanilla
            && self.f_run_is_vanilla
    }
}

pub fn ablation_checks(kind: EncoderKind, seed: u64) -> AblationReport {
    let g = generate(&SynthConfig::small(200, seed)).unwrap();
    let split = stratified_split(&g, DEFAULT_SPLIT_RATIOS, seed).unwrap();
    let base = TrainConfig {
        epochs: 25,
        encoder: EncoderConfig {
            kind,
            ..EncoderConfig::default()
        },
        neutralize: NeutralizeConfig::vanilla(),
        seed,
        ..TrainConfig::default()
    };
    let with = |variant: Variant, delta: f64, f: &dyn Fn(&mut TrainConfig)| {
        let mut c = base.clone();
        c.neutralize = NeutralizeConfig {
            delta,
            per_layer_delta: None,
            variant,
        };
        f(&mut c);
        train(&g, &split, &c).unwrap()
    };
    let vanilla = train(&g, &split, &base).unwrap();
    let flags_off = with(Variant::Full, 1.0, &|c| {
        c.no_neutral = true;
        c.no_discri = true;
    });
    let zero = with(Variant::Full, 0.0, &|c| c.adv_weight = 0.0);
    let g_run = with(Variant::G, 0.0, &|_| {});
    let f_run = with(Variant::F, 0.0, &|_| {});
    let est_cfg = EstimatorConfig::default();
    AblationReport {
        flags_off: same_run(&vanilla, &flags_off),
        zero_delta_no_adv: same_run(&vanilla, &zero),
        g_dataset_unchanged: reweight_edges(&g, 0.0).unwrap() == g,
        f_dataset_unchanged: preprocess_fairsin_f(&g, 0.0, &est_cfg, seed).unwrap().graph == g,
        g_run_is_vanilla: same_run(&vanilla, &g_run),
        f_run_is_vanilla: same_run(&vanilla, &f_run),
    }
}
