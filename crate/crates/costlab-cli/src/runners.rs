//! One runner per scenario kind. Runners are pure functions of the
//! scenario; instance `i` of a multi-instance scenario is generated from the
//! `i`-th seed of [`gen::instance_seeds`].

#![allow(clippy::result_large_err)]

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::sync::Arc;

use costlab::constructions::{
    build_complete_model, build_prompt_simple, build_simple, diagonalize_nonimplication, qualifying, separation_run,
    slow_enum_n, ConstructionError, MockApprox, NonImplication, Opponent, Universe,
};
use costlab::cost::{
    benign_witness, cost_of_trace, dominance_violations, ApproximationTrace, CostFn, EnumerationTrace, Props,
    TraceError,
};
use costlab::dual::{dual_construct, CostFunctional};
use costlab::gen::{self, instance_seeds};
use costlab::machine::{
    baseline_provider, kc_machine, register_requests, schedule_provider, BaselineConfig, KProvider, MachineError,
    PrefixMachine, RequestSet,
};
use costlab::transforms::{change_set, conjoin, decode_change_set, implication_transfer, join, Pairing};
use costlab::zoo::{
    additive_from_real, additivity_violation, cost_k, cost_max, cost_omega, real_from_additive, LeftCEReal, ZooError,
};
use costlab::Rational;

use crate::report::{q, q_cols, BoundTally, Check, Outcome, Tally};
use crate::scenario::{Kind, Scenario};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("input `{name}`: {msg}")]
    Input { name: &'static str, msg: String },
    #[error("`{key}`: {msg}")]
    Param { key: &'static str, msg: String },
    #[error(transparent)]
    Construction(#[from] ConstructionError),
    #[error(transparent)]
    Machine(#[from] MachineError),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

type Result<T> = std::result::Result<T, RunError>;

pub fn run(sc: &Scenario) -> Result<Outcome> {
    let mut out = match sc.kind {
        Kind::Simple => simple(sc),
        Kind::Domination => domination(sc),
        Kind::Additive => additive(sc),
        Kind::Conjunction => conjunction(sc),
        Kind::Implication => implication(sc),
        Kind::ChangeJoin => change_join(sc),
        Kind::Kraft => kraft(sc),
        Kind::Slow => slow(sc),
        Kind::Benign => benign(sc),
        Kind::Complete => complete(sc),
        Kind::Separation => separation(sc),
        Kind::Dual => dual(sc),
        Kind::Nonimplication => nonimplication(sc),
    }?;
    out.files.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(out)
}

fn input_err(name: &'static str, e: impl std::fmt::Display) -> RunError {
    RunError::Input { name, msg: e.to_string() }
}

fn seeds(sc: &Scenario, default: u64) -> Vec<u64> {
    instance_seeds(sc.seed, sc.int("instances", default) as usize)
}

fn trace_input(sc: &Scenario, name: &'static str) -> Result<Option<ApproximationTrace>> {
    sc.input(name).map(|t| ApproximationTrace::from_text(t).map_err(|e| input_err(name, e))).transpose()
}

fn enumeration_input(sc: &Scenario, name: &'static str) -> Result<Option<EnumerationTrace>> {
    match trace_input(sc, name)? {
        Some(t) => Ok(Some(EnumerationTrace::try_from(t).map_err(|e| input_err(name, e))?)),
        None => Ok(None),
    }
}

fn baseline(horizon: u64) -> Result<Arc<KProvider>> {
    Ok(Arc::new(baseline_provider(horizon, BaselineConfig::default())?))
}

/// Exhaustive prefix-freeness, exact Kraft sums and `Ω = honored weight`.
struct MachineTally {
    prefix: Tally,
    kraft: BoundTally,
    omega: Tally,
    seen: usize,
}

impl MachineTally {
    fn new() -> Self {
        MachineTally {
            prefix: Tally::new("machines prefix-free"),
            kraft: BoundTally::new("machine Kraft sums <= 1"),
            omega: Tally::new("omega at horizon equals honored weight"),
            seen: 0,
        }
    }

    fn machine(&mut self, m: &PrefixMachine) {
        let i = self.seen;
        self.seen += 1;
        self.prefix.record(i, m.is_prefix_free(), || format!("{:?}", m.prefix_violations().first()));
        self.kraft.record(i, &m.kraft_sum(), &Rational::one());
    }

    fn provider(&mut self, p: &KProvider) {
        let i = self.seen;
        self.machine(p.machine());
        let (om, hw) = (p.omega(p.horizon()), p.honored_weight());
        self.omega.record(i, om == &hw, || format!("omega {om}, honored {hw}"));
    }

    fn finish(self, out: &mut Outcome) {
        out.info("machines", self.seen);
        out.check(self.prefix.finish());
        out.check(self.kraft.finish());
        out.check(self.omega.finish());
    }
}

fn cost_by_name(name: &str, horizon: u64, machines: &mut MachineTally) -> Result<CostFn> {
    Ok(match name {
        "geometric" => CostFn::geometric(horizon),
        "omega" | "ck" | "cmax" => {
            let p = baseline(horizon)?;
            machines.provider(&p);
            match name {
                "omega" => cost_omega(&p),
                "ck" => cost_k(&p),
                _ => cost_max(&p),
            }
        }
        other => {
            return Err(RunError::Param {
                key: "cost",
                msg: format!("unknown cost `{other}`; try geometric, omega, ck, cmax"),
            })
        }
    })
}

fn simple(sc: &Scenario) -> Result<Outcome> {
    let h = sc.horizon_or(10_000);
    let mut out = Outcome::default();
    let mut machines = MachineTally::new();
    let c = cost_by_name(sc.word("cost", "omega"), h, &mut machines)?;
    let prompt = sc.flag("prompt", false);
    let universes: Vec<Universe> = match sc.input("universe") {
        Some(t) => vec![Universe::from_text(t).map_err(|e| input_err("universe", e))?],
        None => {
            let (sets, events, xmax) = (sc.int("sets", 32), sc.int("max_events", 64), sc.int("xmax", 4096));
            seeds(sc, 1)
                .iter()
                .map(|&s| gen::universe(&mut gen::rng(s), sets as usize, h, events as usize, xmax))
                .collect()
        }
    };
    out.info("horizon", h);
    out.info("cost", c.name());
    out.info("prompt", prompt);
    out.info("universes", universes.len());
    let two = Rational::from_int(2);
    let mut bound = BoundTally::new("total cost <= 2");
    let mut share = Tally::new("at least 90% of qualifying requirements met");
    let mut shape = Tally::new("at most one element per met requirement, each >= 2e");
    let mut rows = format!("instance,{},qualifying,met_qualifying,met\n", q_cols("total"));
    let (mut all_q, mut all_met) = (0usize, 0usize);
    for (i, u) in universes.iter().enumerate() {
        let run = if prompt { build_prompt_simple(&c, u, h) } else { build_simple(&c, u, h) };
        let ledger = cost_of_trace(&c, run.set.as_trace());
        bound.record(i, ledger.total(), &two);
        let qual = qualifying(&c, u, h, prompt);
        let nq = qual.iter().filter(|&&b| b).count();
        let met_q = run.ledger.records.iter().zip(&qual).filter(|(r, &ok)| ok && r.met).count();
        all_q += nq;
        all_met += met_q;
        share.record(i, met_q * 10 >= nq * 9, || format!("{met_q}/{nq}"));
        let members = run.set.final_set();
        let witnesses_ok = run
            .ledger
            .records
            .iter()
            .enumerate()
            .all(|(e, r)| !r.met || r.witness.is_some_and(|x| x >= 2 * e as u64 && members.contains(&x)));
        shape.record(i, witnesses_ok && members.len() <= run.ledger.met_count(), || {
            format!("{} members for {} met requirements", members.len(), run.ledger.met_count())
        });
        let _ = writeln!(rows, "{i},{},{nq},{met_q},{}", q(ledger.total()), run.ledger.met_count());
        if i == 0 {
            out.file("universe.txt", u.to_text());
            out.file("set.txt", run.set.as_trace().to_text());
            out.file("ledger.csv", ledger.to_csv());
            out.file("requirements.csv", run.ledger.to_csv());
        }
    }
    out.info("qualifying_met", format!("{all_met}/{all_q}"));
    out.check(bound.finish());
    out.check(share.finish());
    out.check(shape.finish());
    machines.finish(&mut out);
    out.file("instances.csv", rows);
    Ok(out)
}

fn domination(sc: &Scenario) -> Result<Outcome> {
    let h = sc.horizon_or(1 << 12);
    let mut out = Outcome::default();
    let p = baseline(h)?;
    let (ck, co, cm) = (cost_k(&p), cost_omega(&p), cost_max(&p));
    let pairs = (h + 1) * (h + 2) / 2;
    out.info("horizon", h);
    out.info("grid_pairs", pairs);
    for (name, lo, hi) in [("c_K(x,s) <= Omega_s - Omega_x", &ck, &co), ("c_max(x,s) <= c_K(x,s)", &cm, &ck)] {
        let v = dominance_violations(lo, hi, h);
        let mut detail = format!("{} violations over {pairs} pairs", v.len());
        if let Some((x, s)) = v.first() {
            let _ = write!(detail, "; first at ({x}, {s}): {} > {}", lo.eval(*x, *s), hi.eval(*x, *s));
        }
        out.check(Check::new(name, v.is_empty(), detail));
    }
    let mut machines = MachineTally::new();
    machines.provider(&p);
    machines.finish(&mut out);
    let mut omega = format!("s,{}\n", q_cols("omega"));
    for s in 0..=h {
        let _ = writeln!(omega, "{s},{}", q(p.omega(s)));
    }
    out.file("omega.csv", omega);
    Ok(out)
}

fn additive(sc: &Scenario) -> Result<Outcome> {
    let triples = sc.int("triples", 200);
    let h = sc.horizon_or(triples.max(1) + 1);
    let mut out = Outcome::default();
    let reals: Vec<LeftCEReal> = match sc.input("real") {
        Some(t) => vec![LeftCEReal::from_text(t, None).map_err(|e| input_err("real", e))?],
        None => seeds(sc, 1).iter().map(|&s| gen::left_ce_real(&mut gen::rng(s), h)).collect(),
    };
    out.info("horizon", h);
    out.info("reals", reals.len());
    let mut add = Tally::new(format!("additive on all x < y < z <= {triples}"));
    let mut round = Tally::new("real -> cost -> real is the identity");
    let mut rows = format!("instance,{}\n", q_cols("limit"));
    for (i, r) in reals.iter().enumerate() {
        let c = additive_from_real(r);
        let v = additivity_violation(&c, triples);
        add.record(i, v.is_none(), || format!("fails at {v:?}"));
        let back: std::result::Result<LeftCEReal, ZooError> = real_from_additive(&c);
        let same = back.as_ref().is_ok_and(|b| b.seq() == r.seq());
        round.record(i, same, || match &back {
            Ok(_) => "sequences differ".into(),
            Err(e) => e.to_string(),
        });
        let _ = writeln!(rows, "{i},{}", q(r.limit()));
        if i == 0 {
            out.file("real.txt", r.to_text());
        }
    }
    out.check(add.finish());
    out.check(round.finish());
    out.file("instances.csv", rows);
    Ok(out)
}

fn conjunction(sc: &Scenario) -> Result<Outcome> {
    let h = sc.horizon_or(60);
    let (xmax, flips) = (sc.int("xmax", 24), sc.int("max_flips", 4) as u32);
    let mut out = Outcome::default();
    let given = match (trace_input(sc, "trace")?, trace_input(sc, "other")?) {
        (Some(e), Some(f)) => Some((e, f)),
        (None, None) => None,
        _ => return Err(RunError::Input { name: "other", msg: "`trace` and `other` come together".into() }),
    };
    let ids = if given.is_some() { vec![sc.seed] } else { seeds(sc, 1) };
    out.info("horizon", h);
    let four = Rational::from_int(4);
    let mut applies = Tally::new("conjoin applies");
    let mut same = Tally::new("final set preserved");
    let mut bound = BoundTally::new("(c+d)<conjoined> <= 4 + c<E> + d<F>");
    let mut rows = format!("instance,c,d,{},{}\n", q_cols("lhs"), q_cols("rhs"));
    for (i, &s) in ids.iter().enumerate() {
        let mut g = gen::rng(s);
        let (e, f) = match &given {
            Some(p) => p.clone(),
            None => gen::paired_traces(&mut g, h, xmax, flips),
        };
        let c = gen::monotone_cost(&mut g, h);
        let d = gen::monotone_cost(&mut g, h);
        let r = conjoin(&e, &f);
        applies.record(i, r.is_ok(), || format!("{:?}", r.as_ref().err()));
        let Ok(r) = r else { continue };
        same.record(i, r.trace.final_set() == e.final_set(), || "final sets differ".into());
        let lhs = cost_of_trace(&c.plus(&d), &r.trace).total().clone();
        let rhs = &four + &(cost_of_trace(&c, &e).total() + cost_of_trace(&d, &f).total());
        bound.record(i, &lhs, &rhs);
        let _ = writeln!(rows, "{i},{},{},{},{}", c.name(), d.name(), q(&lhs), q(&rhs));
        if i == 0 {
            out.file("e.txt", e.to_text());
            out.file("f.txt", f.to_text());
            out.file("conjoined.txt", r.trace.to_text());
        }
    }
    out.check(applies.finish());
    out.check(same.finish());
    out.check(bound.finish());
    out.file("instances.csv", rows);
    Ok(out)
}

fn implication(sc: &Scenario) -> Result<Outcome> {
    let h = sc.horizon_or(60);
    let (xmax, changes, n_max) = (sc.int("xmax", 24), sc.int("changes", 30), sc.int("n_max", 8));
    let mut out = Outcome::default();
    let given = trace_input(sc, "trace")?;
    let ids = if given.is_some() { vec![sc.seed] } else { seeds(sc, 1) };
    out.info("horizon", h);
    let mut pre = Tally::new("N c(x,s) >= d(x,s) on the full grid");
    let mut applies = Tally::new("implication transfer applies");
    let mut same = Tally::new("final set preserved");
    let mut bound = BoundTally::new("d<output> <= N c<input>");
    let mut rows = format!("instance,n,{},{}\n", q_cols("lhs"), q_cols("rhs"));
    for (i, &s) in ids.iter().enumerate() {
        let mut g = gen::rng(s);
        let a = match &given {
            Some(t) => t.clone(),
            None => gen::trace(&mut g, h, xmax, changes as usize),
        };
        let (c, d, n) = gen::dominated_pair(&mut g, h, n_max);
        let bad = (1..=h).find_map(|s| {
            let (cr, dr) = (c.row(s, s - 1), d.row(s, s - 1));
            cr.iter().zip(&dr).position(|(p, q)| &p.mul_int(n) < q).map(|x| (x, s))
        });
        pre.record(i, bad.is_none(), || format!("fails at {bad:?}"));
        let r = implication_transfer(&a, &c, &d, n);
        applies.record(i, r.is_ok(), || format!("{:?}", r.as_ref().err()));
        let Ok(r) = r else { continue };
        same.record(i, r.trace.final_set() == a.final_set(), || "final sets differ".into());
        let lhs = cost_of_trace(&d, &r.trace).total().clone();
        let rhs = cost_of_trace(&c, &a).total().mul_int(n);
        bound.record(i, &lhs, &rhs);
        let _ = writeln!(rows, "{i},{n},{},{}", q(&lhs), q(&rhs));
    }
    out.check(pre.finish());
    out.check(applies.finish());
    out.check(same.finish());
    out.check(bound.finish());
    out.file("instances.csv", rows);
    Ok(out)
}

fn change_join(sc: &Scenario) -> Result<Outcome> {
    let h = sc.horizon_or(60);
    let (xmax, changes) = (sc.int("xmax", 24), sc.int("changes", 30) as usize);
    let mut out = Outcome::default();
    let given = match (trace_input(sc, "trace")?, trace_input(sc, "other")?) {
        (Some(a), b) => Some((a.clone(), b.unwrap_or_else(|| ApproximationTrace::empty(a.horizon())))),
        (None, None) => None,
        (None, Some(_)) => return Err(RunError::Input { name: "other", msg: "needs `trace` as well".into() }),
    };
    let ids = if given.is_some() { vec![sc.seed] } else { seeds(sc, 1) };
    out.info("horizon", h);
    let p = Pairing::cantor();
    let mut decode = Tally::new("decode(change set) = final set");
    let mut cs_bound = BoundTally::new("c<change set> <= c<A>");
    let mut join_set = Tally::new("A join B = 2A u (2B+1)");
    let mut join_bound = BoundTally::new("c<A join B> <= c<A> + c<B>");
    let mut rows =
        format!("instance,{},{},{},{}\n", q_cols("c_a"), q_cols("c_b"), q_cols("c_change"), q_cols("c_join"));
    for (i, &s) in ids.iter().enumerate() {
        let mut g = gen::rng(s);
        let (a, b) = match &given {
            Some(pair) => pair.clone(),
            None => (gen::trace(&mut g, h, xmax, changes), gen::trace(&mut g, h, xmax, changes)),
        };
        let c = gen::monotone_cost(&mut g, h);
        let cs = change_set(&a, p);
        decode.record(i, decode_change_set(&cs, p) == a.final_set(), || "decoded set differs".into());
        let (ca, cb) = (cost_of_trace(&c, &a).total().clone(), cost_of_trace(&c, &b).total().clone());
        let cc = cost_of_trace(&c, cs.as_trace()).total().clone();
        cs_bound.record(i, &cc, &ca);
        let j = join(&a, &b);
        let want: BTreeSet<u64> =
            a.final_set().iter().map(|x| 2 * x).chain(b.final_set().iter().map(|y| 2 * y + 1)).collect();
        join_set.record(i, j.final_set() == want, || "join has the wrong members".into());
        let cj = cost_of_trace(&c, &j).total().clone();
        join_bound.record(i, &cj, &(&ca + &cb));
        let _ = writeln!(rows, "{i},{},{},{},{}", q(&ca), q(&cb), q(&cc), q(&cj));
    }
    out.check(decode.finish());
    out.check(cs_bound.finish());
    out.check(join_set.finish());
    out.check(join_bound.finish());
    out.file("instances.csv", rows);
    Ok(out)
}

fn kraft(sc: &Scenario) -> Result<Outcome> {
    let h = sc.horizon_or(256);
    let (count, max_len, d) = (sc.int("requests", 64) as usize, sc.int("max_len", 12) as u32, sc.int("d", 1) as u32);
    let mut out = Outcome::default();
    let sets: Vec<RequestSet> = match sc.input("requests") {
        Some(t) => vec![RequestSet::from_text(t).map_err(|e| input_err("requests", e))?],
        None => seeds(sc, 1).iter().map(|&s| gen::request_set(&mut gen::rng(s), h, count, max_len)).collect(),
    };
    out.info("horizon", h);
    out.info("request_sets", sets.len());
    let mut machines = MachineTally::new();
    let base = baseline(h)?;
    machines.provider(&base);
    let mut rows = format!("instance,requests,{}\n", q_cols("weight"));
    for (i, rs) in sets.iter().enumerate() {
        machines.machine(&kc_machine(rs, d)?);
        machines.provider(&schedule_provider(h, &[(rs.clone(), d)])?);
        machines.provider(&register_requests(&base, rs, d.max(1))?);
        let _ = writeln!(rows, "{i},{},{}", rs.len(), q(rs.weight()));
        if i == 0 {
            out.file("requests.txt", rs.to_text());
        }
    }
    machines.finish(&mut out);
    out.file("instances.csv", rows);
    Ok(out)
}

fn slow(sc: &Scenario) -> Result<Outcome> {
    let j = sc.int("j", 12) as u32;
    let cfg = BaselineConfig::default();
    let h = sc.horizon_or(cfg.delay(j) + (1u64 << j.saturating_sub(1)) + 2);
    let mut out = Outcome::default();
    let p = baseline(h)?;
    let run = slow_enum_n(&p, j)?;
    out.info("horizon", h);
    out.info("j0", run.j0);
    out.info("total", &run.total);
    let mut per = Tally::new(format!("per-interval c_K cost >= 1 for j in [{}, {j}]", run.j0));
    let mut rows = format!("j,lo,hi,delayed,{}\n", q_cols("cost"));
    for iv in &run.intervals {
        if iv.j >= run.j0 {
            per.record(iv.j as usize, iv.cost >= Rational::one(), || format!("j = {}: {}", iv.j, iv.cost));
        }
        let _ = writeln!(rows, "{},{},{},{},{}", iv.j, iv.lo, iv.hi, u8::from(iv.delayed), q(&iv.cost));
    }
    out.check(per.finish());
    let need = Rational::from_int(u64::from(j.saturating_sub(run.j0)));
    out.check(Check::new(format!("total >= {j} - j0"), run.total >= need, format!("{} >= {need}", run.total)));
    let mut machines = MachineTally::new();
    machines.provider(&p);
    machines.finish(&mut out);
    out.file("intervals.csv", rows);
    out.file("set.txt", run.trace.as_trace().to_text());
    Ok(out)
}

fn benign(sc: &Scenario) -> Result<Outcome> {
    let h = sc.horizon_or(1 << 12);
    let n_max = sc.int("n_max", 10) as u32;
    let mut out = Outcome::default();
    let p = baseline(h)?;
    out.info("horizon", h);
    let mut rows = String::from("cost,n,k,bound\n");
    let mut ck_ok = Tally::new(format!("c_K chains k <= 2^n for n <= {n_max}"));
    let ck = cost_k(&p);
    for n in 0..=n_max {
        let k = benign_witness(&ck, n, h).len();
        ck_ok.record(n as usize, k as u64 <= 1u64 << n, || format!("n = {n}: k = {k}"));
        let _ = writeln!(rows, "c_K,{n},{k},{}", 1u64 << n);
    }
    out.check(ck_ok.finish());
    let mut add_ok = Tally::new(format!("additive (cap 1) chains k <= 2^n for n <= {n_max}"));
    for (i, &s) in seeds(sc, 4).iter().enumerate() {
        let c = additive_from_real(&gen::left_ce_real(&mut gen::rng(s), h));
        let worst = (0..=n_max).map(|n| (n, benign_witness(&c, n, h).len())).find(|&(n, k)| k as u64 > 1u64 << n);
        add_ok.record(i, worst.is_none(), || format!("{worst:?}"));
        if i == 0 {
            for n in 0..=n_max {
                let _ = writeln!(rows, "additive,{n},{},{}", benign_witness(&c, n, h).len(), 1u64 << n);
            }
        }
    }
    out.check(add_ok.finish());
    let mut machines = MachineTally::new();
    machines.provider(&p);
    machines.finish(&mut out);
    out.file("chains.csv", rows);
    Ok(out)
}

fn complete(sc: &Scenario) -> Result<Outcome> {
    let h = sc.horizon_or(2000);
    let req = sc.int("requirements", 12) as usize;
    let (p_small, spread, p_conv) = (sc.prob("p_small", 0.3), sc.int("spread", 3), sc.prob("p_conv", 0.5));
    let mut out = Outcome::default();
    let given = enumeration_input(sc, "halting")?;
    let ids = if given.is_some() { vec![sc.seed] } else { seeds(sc, 1) };
    out.info("horizon", h);
    let four = Rational::from_int(4);
    let mut inv = Tally::new("beta_s - beta_gamma(k,s) <= 2^-k at every stage");
    let mut total = BoundTally::new("c_beta total cost <= 4");
    let mut decode = Tally::new("Gamma decodes the halting set at the horizon");
    let mut reqs = Tally::new("each convergent phi_k(k) meets its requirement");
    let mut rows = format!("instance,members,markers,{},{}\n", q_cols("cost"), q_cols("beta"));
    for (i, &s) in ids.iter().enumerate() {
        let mut g = gen::rng(s);
        let zp = match &given {
            Some(z) => z.clone(),
            None => gen::halting_schedule(&mut g, h, p_small, spread),
        };
        let phis = gen::halting_phis(&mut g, req, h, p_conv);
        let m = build_complete_model(&zp, &phis, h)?;
        let r = &m.report;
        inv.record(i, r.invariant_violations.is_empty(), || format!("{:?}", r.invariant_violations.first()));
        total.record(i, &r.total_cost, &four);
        decode.record(i, r.decode_exact(), || "decode differs".into());
        reqs.record(i, r.requirements.iter().all(|&(_, ok)| ok), || format!("{:?}", r.requirements));
        let _ = writeln!(
            rows,
            "{i},{},{},{},{}",
            m.set.final_set().len(),
            m.markers.len(),
            q(&r.total_cost),
            q(m.beta.limit())
        );
        if i == 0 {
            let mut log = String::from("s,k,value,reason\n");
            for ev in &m.markers {
                let _ = writeln!(log, "{},{},{},{:?}", ev.s, ev.k, ev.value, ev.reason);
            }
            out.file("markers.csv", log);
            out.file("beta.txt", m.beta.to_text());
            out.file("set.txt", m.set.as_trace().to_text());
            out.file("halting.txt", zp.as_trace().to_text());
        }
    }
    out.check(inv.finish());
    out.check(total.finish());
    out.check(decode.finish());
    out.check(reqs.finish());
    out.file("instances.csv", rows);
    Ok(out)
}

fn separation(sc: &Scenario) -> Result<Outcome> {
    let (b, d) = (sc.int("b", 0) as u32, sc.int("d", 1) as u32);
    let budget = sc.int("budget", 100_000);
    let min_points = sc.int("min_points", 3) as usize;
    let opponent = match sc.word("opponent", "honest") {
        "honest" => Opponent::Honest(BaselineConfig::default()),
        "responsive" => Opponent::Responsive,
        other => {
            return Err(RunError::Param {
                key: "opponent",
                msg: format!("unknown opponent `{other}`; try honest, responsive"),
            })
        }
    };
    let mut out = Outcome::default();
    let run = separation_run(b, opponent, d, budget)?;
    out.info("b", b);
    out.info("d", d);
    out.info("k", run.k);
    out.info("target_points", format!("2^{}", run.k));
    out.info("status", format!("{:?}", run.status));
    out.info("stages", run.stages);
    let pts: Vec<String> = run.points.iter().map(u64::to_string).collect();
    out.info("points", pts.join(" "));
    out.info("witness", run.witness.map_or("none".to_string(), |w| w.to_string()));
    let held = run.claim.iter().filter(|c| c.holds()).count();
    let first_bad = run.claim.iter().find(|c| !c.holds());
    out.check(Check::new(
        "claim inequality on completed pairs with r <= 2",
        first_bad.is_none(),
        match first_bad {
            None => format!("{held}/{} entries", run.claim.len()),
            Some(c) => format!("p = {}, r = {}: {} < {}", c.p, c.r, c.lhs, c.rhs),
        },
    ));
    out.check(Check::new(
        format!("at least {min_points} sequence elements"),
        run.points.len() >= min_points,
        format!("{} elements", run.points.len()),
    ));
    let one = Rational::one();
    out.check(Check::new(
        "request sets respect Kraft",
        run.requests.weight() <= &one && run.opponent.weight() <= &one,
        format!("L weighs {}, opponent weighs {}", run.requests.weight(), run.opponent.weight()),
    ));
    let mut machines = MachineTally::new();
    machines.provider(&run.provider);
    machines.finish(&mut out);
    let mut claim = format!("p,r,s,{},{},holds\n", q_cols("lhs"), q_cols("rhs"));
    for c in &run.claim {
        let _ = writeln!(claim, "{},{},{},{},{},{}", c.p, c.r, c.s, q(&c.lhs), q(&c.rhs), u8::from(c.holds()));
    }
    out.file("claim.csv", claim);
    out.file("requests.txt", run.requests.to_text());
    out.file("opponent.txt", run.opponent.to_text());
    Ok(out)
}

fn dual(sc: &Scenario) -> Result<Outcome> {
    let h = sc.horizon_or(10_000);
    let req = sc.int("requirements", 6) as usize;
    let c = CostFunctional::delayed_geometric(sc.int("width", 24) as u32, sc.int("span", 2), sc.int("delay", 1));
    let (p_small, spread) = (sc.prob("p_small", 0.3), sc.int("spread", 3));
    let log_instance = sc.int("log_instance", 0) as usize;
    let mut out = Outcome::default();
    let given = enumeration_input(sc, "halting")?;
    let ids = if given.is_some() { vec![sc.seed] } else { seeds(sc, 1) };
    out.info("horizon", h);
    out.info("functional", c.name());
    let three_halves = Rational::new(3, 2).expect("nonzero");
    let mut held = Tally::new("held totals <= 3^-e at every stage end");
    let mut mono = Tally::new("Gamma(x, t) nondecreasing in t on the full grid");
    let mut gamma = BoundTally::new("Gamma-cost of the halting enumeration <= 3/2");
    let mut cancel = Tally::new("cancellations justified by arrivals");
    let mut settle = Tally::new("hat values settle at nondeficiency stages");
    let mut diag = Tally::new("activated requirements diagonalized at horizon");
    let mut rows = format!("instance,wishes,activations,real_horizon,{},passed\n", q_cols("gamma_cost"));
    for (i, &s) in ids.iter().enumerate() {
        let mut g = gen::rng(s);
        let zp = match &given {
            Some(z) => z.clone(),
            None => gen::halting_schedule(&mut g, h, p_small, spread),
        };
        let phis = gen::dual_phis(&mut g, req);
        let st = dual_construct(&c, &zp, &phis)?;
        let r = st.report();
        held.record(i, r.held_bounds_ok, || "a held total exceeds its bound".into());
        mono.record(i, r.gamma_decreases == 0, || format!("{} decreases", r.gamma_decreases));
        gamma.record(i, &r.gamma_cost, &three_halves);
        cancel.record(i, r.cancellations_justified, || "unjustified cancellation".into());
        settle.record(i, r.settle_failures.is_empty(), || format!("stages {:?}", r.settle_failures));
        diag.record(i, r.diagonalized(), || format!("{:?}", r.diagonalization));
        let _ = writeln!(
            rows,
            "{i},{},{},{},{},{}",
            st.wishes.len(),
            st.activations.len(),
            st.horizon,
            q(&r.gamma_cost),
            u8::from(r.passed())
        );
        if i == log_instance {
            out.file("wishes.csv", st.wish_csv());
            let mut acts = String::from("e,v,x,stage,took_over,cancelled_stage,cancelled_n\n");
            for a in &st.activations {
                let (cs, cn) =
                    a.cancelled.map_or((String::new(), String::new()), |(s, n)| (s.to_string(), n.to_string()));
                let _ = writeln!(acts, "{},{},{},{},{},{cs},{cn}", a.e, a.v, a.x, a.stage, a.took_over);
            }
            out.file("activations.csv", acts);
            let phis: Vec<String> = phis.iter().map(|p| format!("{p:?}")).collect();
            out.file("phis.txt", phis.join("\n") + "\n");
        }
    }
    out.check(held.finish());
    out.check(mono.finish());
    out.check(gamma.finish());
    out.check(cancel.finish());
    out.check(settle.finish());
    out.check(diag.finish());
    out.file("instances.csv", rows);
    Ok(out)
}

/// `copy:LAG`, `until:LAG:T`, `const:X,Y,…` or `silent`.
fn parse_opponent(w: &str) -> Option<MockApprox> {
    let parts: Vec<&str> = w.split(':').collect();
    match parts.as_slice() {
        ["silent"] => Some(MockApprox::Silent),
        ["copy", lag] => Some(MockApprox::Copy { lag: lag.parse().ok()? }),
        ["until", lag, t] => Some(MockApprox::CopyUntil { lag: lag.parse().ok()?, until: t.parse().ok()? }),
        ["const", xs] => {
            let set =
                xs.split(',').filter(|s| !s.is_empty()).map(str::parse).collect::<std::result::Result<_, _>>().ok()?;
            Some(MockApprox::Constant(set))
        }
        _ => None,
    }
}

fn pow_cost(k: u32, horizon: u64) -> CostFn {
    CostFn::from_fn(&format!("2^(-{k}x)"), horizon, Props::monotone().with_proper(true), move |x, s| {
        if x <= s {
            Rational::pow2_neg(k * x as u32)
        } else {
            Rational::zero()
        }
    })
}

fn nonimplication(sc: &Scenario) -> Result<Outcome> {
    let h = sc.horizon_or(200);
    let words = sc.words("opponents");
    let words = if words.is_empty() { vec!["copy:1".to_string()] } else { words };
    let phis = words
        .iter()
        .map(|w| {
            parse_opponent(w).ok_or_else(|| RunError::Param {
                key: "opponents",
                msg: format!("bad opponent `{w}`; try copy:LAG, until:LAG:T, const:X,Y or silent"),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (c, d) = (pow_cost(2, h), pow_cost(1, h));
    let run = diagonalize_nonimplication(&c, &d, &phis, h)?;
    let mut out = Outcome::default();
    out.info("horizon", h);
    out.info("costs", format!("c = {}, d = {}", c.name(), d.name()));
    out.info("actions", run.actions.len());
    let total = cost_of_trace(&c, &run.trace).total().clone();
    let four = Rational::from_int(4);
    out.check(Check::new("c-cost of A <= 4", total <= four, format!("{total} <= {four}")));
    let bad = run.epochs.iter().find(|ep| ep.alpha >= NonImplication::epoch_bound(ep.e, ep.b));
    out.check(Check::new(
        "alpha below 2^(-b-e+1) in every epoch",
        bad.is_none(),
        format!("{} epochs{}", run.epochs.len(), bad.map(|ep| format!("; fails for {ep:?}")).unwrap_or_default()),
    ));
    let met: Vec<usize> = (0..phis.len()).filter(|&e| run.ledger.records[e].met).collect();
    let weak = met.iter().find(|&&e| run.phi_d_costs[e] <= Rational::one());
    out.check(Check::new(
        "met requirements drive the opponent's d-cost above 1",
        weak.is_none(),
        format!("{} of {} met", met.len(), phis.len()),
    ));
    let mut rows = format!("e,opponent,met,{}\n", q_cols("d_cost"));
    for (e, w) in words.iter().enumerate() {
        let _ = writeln!(rows, "{e},{w},{},{}", u8::from(run.ledger.records[e].met), q(&run.phi_d_costs[e]));
    }
    out.file("opponents.csv", rows);
    out.file("requirements.csv", run.ledger.to_csv());
    out.file("trace.txt", run.trace.to_text());
    out.file("ledger.csv", cost_of_trace(&c, &run.trace).to_csv());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    fn scenario(text: &str) -> Scenario {
        Scenario::parse(text, Path::new("."), "t").unwrap()
    }

    #[test]
    fn opponents_parse() {
        assert_eq!(parse_opponent("copy:2"), Some(MockApprox::Copy { lag: 2 }));
        assert_eq!(parse_opponent("until:1:5"), Some(MockApprox::CopyUntil { lag: 1, until: 5 }));
        assert_eq!(parse_opponent("const:1,4"), Some(MockApprox::Constant(BTreeSet::from([1, 4]))));
        assert_eq!(parse_opponent("copy"), None);
    }

    #[test]
    fn small_runs_pass() {
        for text in [
            "kind = simple\nhorizon = 300\ninstances = 3\nsets = 6\nmax_events = 20\nxmax = 200\n",
            "kind = conjunction\ninstances = 5\nhorizon = 30\n",
            "kind = implication\ninstances = 5\nhorizon = 30\n",
            "kind = change-join\ninstances = 5\nhorizon = 30\n",
            "kind = kraft\ninstances = 3\nhorizon = 64\n",
            "kind = additive\ninstances = 3\ntriples = 30\n",
            "kind = complete\ninstances = 3\nhorizon = 200\n",
            "kind = dual\ninstances = 2\nhorizon = 200\nwidth = 10\n",
            "kind = nonimplication\nopponents = copy:1 silent\n",
        ] {
            let out = run(&scenario(text)).unwrap();
            assert!(out.passed(), "{text}\n{:?}", out.failed().collect::<Vec<_>>());
        }
    }

    #[test]
    fn unknown_cost_is_a_param_error() {
        let err = run(&scenario("kind = simple\ncost = cubic\nhorizon = 10\n")).unwrap_err();
        assert!(matches!(err, RunError::Param { key: "cost", .. }));
    }
}
