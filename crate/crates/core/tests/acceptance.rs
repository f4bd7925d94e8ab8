//! Acceptance run: every criterion prints one PASS/FAIL line with the
//! measurements behind it. Exits nonzero if any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::*;
use mcca_core::capacity::{maximize_r_coop, CoopChannel};
use mcca_core::channel_mac::{mac_exchange, MacOutcome, RtsFrame};
use mcca_core::config::{Mode, RunConfig};
use mcca_core::energy::{
    cluster_head_power, energy_local, energy_longhaul, total_energy_per_bit, LinkGeometry,
};
use mcca_core::negotiation::{
    send_reliable, AdjustmentTarget, BernoulliLoss, Initiation, LocalDriver, Negotiator, Phase, Proposal,
    ProtocolConfig, SessionRequest,
};
use mcca_core::power_game::{iterate_to_convergence, verify_nash};
use mcca_core::rng;
use mcca_core::runner::{self, JobResult};
use mcca_core::topology::{build_mst, tree_weight, Graph, TopologyGraphs};
use rand::Rng;

type Outcome = (bool, String);

fn power_game() -> Outcome {
    let mut r = rng::stream(1001, 0);
    let (mut nash, mut interior, mut worst) = (0, 0, 0.0f64);
    for _ in 0..100 {
        let mut g = random_game(&mut r, 5);
        let c = iterate_to_convergence(&mut g, 1e-13, 1000).unwrap();
        if c.converged && verify_nash(&g, &c.q, 200, 1e-6) {
            nash += 1;
        }
        let x = linear_fixed_point(&g);
        if is_interior(&g, &x) {
            interior += 1;
            for (a, b) in c.q.iter().zip(&x) {
                worst = worst.max(rel_err(*a, *b));
            }
        }
    }
    (nash == 100 && worst <= 1e-8, format!("nash {nash}/100, interior {interior}, max rel err {worst:.2e}"))
}

fn mst() -> Outcome {
    let mut r = rng::stream(1002, 0);
    let mut ok = 0;
    for _ in 0..100 {
        let n = r.random_range(2..=7);
        let pts = random_points(&mut r, n, 1000.0);
        let e = build_mst(&pts);
        let (w, set) = mst_by_enumeration(&pts);
        if normalized(&e) == set && (tree_weight(&pts, &e) - w).abs() <= 1e-9 * w {
            ok += 1;
        }
    }
    (ok == 100, format!("{ok}/100 trees equal the enumerated minimum"))
}

fn capacity() -> Outcome {
    let mut r = rng::stream(1003, 0);
    let (mut worst, mut monotone) = (0.0f64, 0);
    for _ in 0..50 {
        let (m1, m2, beta) = random_channel(&mut r);
        let budget = 0.5 + r.random::<f64>() * 10.0;
        let opt = maximize_r_coop(&CoopChannel::new(m1.clone(), m2.clone(), beta, budget), 1e-7).unwrap();
        worst = worst.max((opt.rate - capacity_oracle(&m1, &m2, beta, budget)).abs());
        let rates: Vec<f64> = (1..=10)
            .map(|i| {
                let ch = CoopChannel::new(m1.clone(), m2.clone(), beta, budget * i as f64 / 10.0);
                maximize_r_coop(&ch, 1e-7).unwrap().rate
            })
            .collect();
        if rates.windows(2).all(|w| w[1] >= w[0] - 1e-9) {
            monotone += 1;
        }
    }
    (worst <= 1e-3 && monotone == 50, format!("max |rate - oracle| {worst:.2e} bits, monotone {monotone}/50"))
}

fn energy() -> Outcome {
    let mut r = rng::stream(1004, 0);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let p = random_params(&mut r);
        let j = p.j_coop as usize;
        let d: Vec<f64> = (0..j).map(|_| 1.0 + r.random::<f64>() * 3000.0).collect();
        let k: Vec<f64> = (0..j).map(|_| 2.0 + r.random::<f64>() * 2.0).collect();
        let g = LinkGeometry { distances: d.clone(), path_loss_exponents: k.clone(), e_max: r.random::<f64>() * 50.0 };
        let o = ep(&p);
        worst = worst
            .max(rel_err(energy_local(&p, &g).unwrap(), local_oracle(&o, g.e_max)))
            .max(rel_err(energy_longhaul(&p, &g).unwrap(), longhaul_oracle(&o, &d, &k)))
            .max(rel_err(cluster_head_power(&p, d[0], k[0], |d, k| d.powf(k)).unwrap(), head_power_oracle(&o, d[0], k[0])));
    }
    let p = reference();
    let (p1, p2) = (ep(&p.with_j(1)), ep(&p.with_j(2)));
    let a = crossover(&p1, &p2, 3.0, 2.0, 1.0, 1e5);
    let b = crossover(&p1, &p2, 3.0, 2.0, 1.0, 1e5);
    let sides = a.is_some_and(|d| {
        let at = |j: u32, x: f64| total_energy_per_bit(&p.with_j(j), &LinkGeometry::uniform(j, x, 3.0, 2.0)).unwrap();
        at(2, d * 1.01) < at(1, d * 1.01) && at(2, d * 0.99) > at(1, d * 0.99)
    });
    (
        worst <= 1e-12 && a.is_some() && a == b && sides,
        format!("max rel err {worst:.2e}, crossover {:.3} m (k=3)", a.unwrap_or(f64::NAN)),
    )
}

fn triple_send() -> Outcome {
    let mut r = rng::stream(1005, 0);
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for p in [0.2, 0.5, 0.8] {
        let n = 100_000;
        let fails = (0..n).filter(|_| !send_reliable(p, &mut r).unwrap().delivered()).count();
        let rate = fails as f64 / n as f64;
        worst = worst.max((rate - p * p * p).abs());
        parts.push(format!("p={p}: {rate:.4} vs {:.4}", p * p * p));
    }
    (worst <= 0.02, parts.join(", "))
}

#[derive(Default)]
struct Recorder {
    applied: Vec<Proposal>,
}

impl AdjustmentTarget for Recorder {
    fn apply(&mut self, p: &Proposal) {
        self.applied.push(p.clone());
    }
}

fn negotiation() -> Outcome {
    let mut r = rng::stream(1006, 0);
    let mut violations = 0;
    let mut committed = 0;
    for trial in 0..1000 {
        let n = 8;
        let mut topo = TopologyGraphs::new(Graph::new(n));
        for a in 0..n {
            for b in a + 1..n {
                if r.random::<f64>() < 0.3 {
                    topo.assign_link(a, b);
                }
            }
        }
        let p = r.random::<f64>() * 0.5;
        let mut loss = BernoulliLoss::new(p, rng::substream(1006, 1, trial)).unwrap();
        let mut target = Recorder::default();
        let mut d = LocalDriver::new(Negotiator::new(ProtocolConfig::default()).unwrap(), &topo);
        for initiator in [0, 3, 6] {
            let links: Vec<(usize, usize)> =
                topo.g2.neighbors(initiator).map(|v| (initiator, v)).collect();
            let req = SessionRequest { initiator, proposal: channel_proposal(&links, initiator as u16), attempt: 1 };
            if let Initiation::Refused = d.start(req, &mut loss, &mut target).unwrap() {
                continue;
            }
        }
        let mut dr = rng::substream(1006, 2, trial);
        d.run(&mut |_, _| dr.random::<f64>() < 0.9, &mut loss, &mut target, true).unwrap();
        let neg = &d.negotiator;
        let sessions: Vec<_> = neg.sessions().collect();
        let done: Vec<_> = sessions.iter().filter(|s| s.phase == Phase::Committed).collect();
        committed += done.len();
        let all_final = sessions.iter().all(|s| s.phase.is_final());
        let atomic = target.applied.len() == done.len()
            && done.iter().all(|s| target.applied.contains(&s.proposal));
        let unlocked = (0..n).all(|v| !neg.is_locked(v));
        if d.exclusiveness_violations > 0 || !all_final || !atomic || !unlocked {
            violations += 1;
        }
    }
    let (cases, mismatches) = enumerate_fates();
    (
        violations == 0 && mismatches == 0,
        format!("{violations} violating sessions of 1000 ({committed} commits); fate oracle {mismatches}/{cases} mismatches"),
    )
}

fn sweep_config() -> RunConfig {
    let mut c = RunConfig::default();
    c.traffic.flows = 64;
    c.sweep.variable = "scenario.node_count".into();
    c.sweep.values = vec![200.0, 400.0, 600.0, 800.0, 1000.0, 1200.0];
    c.sweep.seeds = vec![1, 2, 3];
    c.sim.modes = Mode::ALL.to_vec();
    c
}

fn mean_of(results: &[JobResult], point: usize, mode: Mode, f: impl Fn(&JobResult) -> f64) -> f64 {
    let xs: Vec<f64> = results.iter().filter(|r| r.point == point && r.mode == mode).map(f).collect();
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn energy_ordering(results: &[JobResult], points: usize, secs: f64) -> Outcome {
    let mut ok = secs < 300.0;
    let mut parts = Vec::new();
    for p in 0..points {
        let e = |m| mean_of(results, p, m, |r| r.output.final_frame.relative_energy);
        let (b, g, m) = (e(Mode::BaselineNoCoop), e(Mode::StrategyGameOnly), e(Mode::MccaClss));
        ok &= m <= g && g <= b;
        parts.push(format!("{m:.3}/{g:.3}/{b:.3}"));
    }
    (ok, format!("mcca/game/baseline per point [{}], {secs:.0} s", parts.join(" ")))
}

fn blocking_shape(results: &[JobResult], points: usize) -> Outcome {
    let curve: Vec<f64> = (0..points)
        .map(|p| mean_of(results, p, Mode::MccaClss, |r| r.output.final_frame.blocking_prob))
        .collect();
    let max = curve.iter().copied().fold(0.0, f64::max);
    let sat = curve.iter().position(|&b| b >= 0.8 * max).unwrap_or(points - 1);
    let rising = curve[..=sat].windows(2).all(|w| w[1] >= w[0]);
    let (a, b) = (curve[points - 2], curve[points - 1]);
    let rel = (b - a).abs() / a.max(b).max(f64::MIN_POSITIVE);
    let shown: Vec<String> = curve.iter().map(|b| format!("{b:.2}")).collect();
    (
        rising && rel < 0.2,
        format!("blocking % [{}], saturation at point {sat}, last-two diff {:.1}%", shown.join(" "), 100.0 * rel),
    )
}

fn artifact_bytes(cfg: &RunConfig, threads: usize) -> Vec<(std::path::PathBuf, Vec<u8>)> {
    let dir = tempfile::tempdir().unwrap();
    let report = runner::run_sweep(cfg, threads).unwrap();
    let files = runner::write_artifacts(dir.path(), cfg, &report).unwrap();
    files
        .iter()
        .map(|p| (p.strip_prefix(dir.path()).unwrap().to_path_buf(), std::fs::read(p).unwrap()))
        .collect()
}

fn determinism() -> Outcome {
    let mut c = sweep_config();
    c.sweep.values = vec![200.0, 400.0];
    c.sweep.seeds = vec![7, 8];
    c.sim.sim_time_s = 1024.0;
    c.output.placements = true;
    c.output.channel_loads = true;
    c.output.trace = true;
    let a = artifact_bytes(&c, 1);
    let b = artifact_bytes(&c, 1);
    let par = std::thread::available_parallelism().map_or(4, |n| n.get()).max(4);
    let d = artifact_bytes(&c, par);
    let same = a == b && a == d;
    (same && !a.is_empty(), format!("{} files identical across reruns and 1 vs {par} threads", a.len()))
}

fn mac_priority() -> Outcome {
    let mut r = rng::stream(1010, 0);
    let rts = RtsFrame::new(0, vec![1, 2, 3], 1).unwrap();
    let n = 100_000;
    let mut wins = [0usize; 3];
    for _ in 0..n {
        if let MacOutcome::Winner { rank, .. } = mac_exchange(&rts, &[1.0; 3], 0.5, 0.5, &mut r).unwrap() {
            wins[rank] += 1;
        }
    }
    let freq: Vec<f64> = wins.iter().map(|w| *w as f64 / n as f64).collect();
    let ok = freq.iter().zip([0.5, 0.25, 0.125]).all(|(f, e)| (f - e).abs() <= 0.02);
    (ok, format!("winner distribution ({:.4}, {:.4}, {:.4})", freq[0], freq[1], freq[2]))
}

fn report(id: usize, name: &str, start: Instant, (ok, detail): Outcome, all: &mut bool) {
    *all &= ok;
    println!(
        "{} {id:>2} {name}: {detail} [{:.1} s]",
        if ok { "PASS" } else { "FAIL" },
        start.elapsed().as_secs_f64()
    );
}

fn main() -> ExitCode {
    let mut all = true;
    let t = Instant::now();
    report(1, "power-game fixed point", t, power_game(), &mut all);
    let t = Instant::now();
    report(2, "MST oracle equivalence", t, mst(), &mut all);
    let t = Instant::now();
    report(3, "capacity optimizer", t, capacity(), &mut all);
    let t = Instant::now();
    report(4, "energy model", t, energy(), &mut all);
    let t = Instant::now();
    report(5, "triple-send law", t, triple_send(), &mut all);
    let t = Instant::now();
    report(6, "negotiation safety", t, negotiation(), &mut all);

    let t = Instant::now();
    let cfg = sweep_config();
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    let sweep = runner::run_sweep(&cfg, threads).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let points = cfg.sweep.values.len();
    if !sweep.errors.is_empty() {
        all = false;
        println!("FAIL  sweep: {} runs failed", sweep.errors.len());
    }
    report(7, "energy ordering", t, energy_ordering(&sweep.results, points, secs), &mut all);
    let t = Instant::now();
    report(8, "blocking shape", t, blocking_shape(&sweep.results, points), &mut all);
    let t = Instant::now();
    report(9, "determinism", t, determinism(), &mut all);
    let t = Instant::now();
    report(10, "MAC priority law", t, mac_priority(), &mut all);

    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
