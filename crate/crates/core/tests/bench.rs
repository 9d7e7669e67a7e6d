use popinit::bench::{
    aggregate_wdl, csv_report, curve_data, ranksum_exact, ranksum_normal, text_table, wilcoxon_ranksum, GroupBy,
    Method, RunRecord, Wdl,
};
use popinit::rng::seeded;
use rand::Rng;

fn record(class: &str, seed: u64, method: Method, rep: usize, best: f64) -> RunRecord {
    RunRecord {
        cell: format!("{class}-d10-s{seed}/{method}/r{rep}"),
        class: class.into(),
        dim: 10,
        instance_seed: seed,
        method,
        rep,
        run_seed: rep as u64,
        budget: 800,
        best_objective: best,
        best_solution: "0".repeat(10),
        fes_init: 20,
        fes_total: 800,
        sweep: vec![(400, best - 1.0), (800, best)],
    }
}

fn methods() -> (Method, Method) {
    ("rand+ga-elite".parse().unwrap(), "mpi+ga-elite".parse().unwrap())
}

/// Two classes, three instances each; `challenger(rep)` gives the challenger's value.
fn table(challenger: impl Fn(usize) -> f64) -> Vec<RunRecord> {
    let (base, chal) = methods();
    let mut out = Vec::new();
    for class in ["OM", "KP"] {
        for seed in 0..3 {
            for rep in 0..10 {
                out.push(record(class, seed, base, rep, 10.0 + (rep % 3) as f64 * 0.01));
                out.push(record(class, seed, chal, rep, challenger(rep)));
            }
        }
    }
    out
}

#[test]
fn wilcoxon_examples() {
    assert!((wilcoxon_ranksum(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap() - 0.1).abs() < 1e-12);
    assert_eq!(wilcoxon_ranksum(&[3.0, 1.0, 2.0], &[3.0, 1.0, 2.0]).unwrap(), 1.0);
    assert!(wilcoxon_ranksum(&[1.0], &[]).is_err());
    // 30 values: normal branch; fully separated samples are highly significant.
    let a: Vec<f64> = (0..15).map(f64::from).collect();
    let b: Vec<f64> = (15..30).map(f64::from).collect();
    assert!(wilcoxon_ranksum(&a, &b).unwrap() < 1e-4);
}

#[test]
fn exact_and_normal_branches_agree_on_ten_versus_ten() {
    let mut r = seeded(11);
    for _ in 0..200 {
        let shift = r.random_range(0.0..1.5);
        let a: Vec<f64> = (0..10).map(|_| r.random::<f64>()).collect();
        let b: Vec<f64> = (0..10).map(|_| r.random::<f64>() + shift).collect();
        let (e, n) = (ranksum_exact(&a, &b), ranksum_normal(&a, &b));
        assert!((e - n).abs() < 0.02, "exact {e} normal {n}");
    }
}

#[test]
fn all_draws_and_clear_dominance() {
    let (base, chal) = methods();
    let draws = table(|rep| 10.0 + (rep % 3) as f64 * 0.01);
    let all = aggregate_wdl(&draws, base, chal, GroupBy::All, 0.05).unwrap();
    assert_eq!(all, vec![("all".to_string(), Wdl { wins: 0, draws: 6, losses: 0 })]);

    let dominated = table(|rep| 20.0 + rep as f64 * 1e-6);
    let all = aggregate_wdl(&dominated, base, chal, GroupBy::All, 0.05).unwrap();
    assert_eq!(all[0].1, Wdl { wins: 6, draws: 0, losses: 0 });
    let by_class = aggregate_wdl(&dominated, base, chal, GroupBy::Class, 0.05).unwrap();
    assert_eq!(by_class.len(), 2);
    assert!(by_class.iter().all(|(_, w)| w.wins + w.draws + w.losses == 3));
}

#[test]
fn missing_cells_are_reported() {
    let (base, chal) = methods();
    let mut t = table(|_| 12.0);
    t.retain(|r| !(r.method == chal && r.class == "KP" && r.instance_seed == 2));
    assert!(aggregate_wdl(&t, base, chal, GroupBy::All, 0.05).is_err());
}

#[test]
fn reports_cover_every_record() {
    let (base, chal) = methods();
    let t = table(|rep| 20.0 + rep as f64);
    let csv = csv_report(&t);
    assert_eq!(csv.lines().count(), t.len() + 1);
    assert!(csv.lines().next().unwrap().starts_with("class,dim,instance_seed,method,optimizer"));

    let curve = curve_data(&t, base, chal, &[400, 800], 0.05).unwrap();
    for line in curve.lines().skip(1) {
        let f: Vec<i64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(f[5], f[2] - f[4]);
    }
    let table_text = text_table(&t, base, 0.05).unwrap();
    assert_eq!(table_text.lines().count(), 6 + 2);
    assert!(table_text.lines().last().unwrap().contains("6-0-0"));
}
