//! Fast invariant sweep across every module; each check returns a detail
//! string on success or failure. The suite is sized to finish in seconds.

use exarray::decomp::{
    check_q_symmetry, hoeffding, hoeffding_mc, table_h_from_q, table_h_recombined,
};
use exarray::index::{
    binomial, embed, enumerate_tuples, mask_to_set, pattern_vectors, tuple_count, PatternVector,
};
use exarray::limits::{
    counterexample, estimate_v, khintchine_check, normalization_exponent, streaming_sum,
    streaming_sum_ordered,
};
use exarray::model::{builtin_models, ArrayModel};
use exarray::source::{UniformSource, UniformStream};
use exarray::stable::{sample_stable, StableParams};
use exarray::stats::{ks_critical_one_sample_1pct, ks_uniform};
use exarray::{IndexSet, IndexTuple};

type Check = std::result::Result<String, String>;

fn ensure(cond: bool, ok: String, fail: String) -> Check {
    if cond {
        Ok(ok)
    } else {
        Err(fail)
    }
}

pub fn tuple_counts() -> Check {
    for n in 1..=8u64 {
        for k in 1..=n as usize {
            let unordered = enumerate_tuples(n, k, false).unwrap().count() as u64;
            let ordered = enumerate_tuples(n, k, true).unwrap().count() as u64;
            if unordered != tuple_count(n, k).unwrap() || ordered != binomial(n, k).unwrap() {
                return Err(format!("count mismatch at n={n} k={k}"));
            }
        }
    }
    Ok("n!/(n−k)! and C(n,k) verified exhaustively for n ≤ 8".to_string())
}

pub fn pattern_order() -> Check {
    let k3: Vec<String> = pattern_vectors(3, None).unwrap().iter().map(|e| e.to_string()).collect();
    ensure(
        k3 == ["000", "001", "010", "100", "011", "101", "110", "111"]
            && pattern_vectors(4, Some(2)).unwrap().len() == 6,
        "canonical pattern order stable, level counts binomial".to_string(),
        format!("unexpected pattern order {k3:?}"),
    )
}

pub fn embedding_roundtrip() -> Check {
    let e = PatternVector::from_bits(&[1, 0, 1]).unwrap();
    let embedded = embed(&[5, 3], &e).unwrap();
    let set = mask_to_set(&embedded, &e).unwrap();
    ensure(
        embedded == [5, 0, 3] && set.labels() == [3, 5],
        "embed places entries at selected positions; masking recovers them".to_string(),
        format!("embed/mask mismatch: {embedded:?} / {:?}", set.labels()),
    )
}

pub fn table_identities() -> Check {
    let mut stream = UniformStream::new(0x7e57);
    for trial in 0..200u32 {
        let k = 2 + (trial % 4) as usize;
        let table: Vec<f64> =
            (0..(1usize << k)).map(|_| stream.next_uniform() * 20.0 - 10.0).collect();
        let mut total = 0.0;
        for level in 0..=k {
            let a = table_h_from_q(k, &table, level).unwrap();
            let b = table_h_recombined(k, &table, level).unwrap();
            if (a - b).abs() > 1e-10 {
                return Err(format!("recombination mismatch at trial {trial} level {level}"));
            }
            total += a;
        }
        if (total - table.last().unwrap()).abs() > 1e-10 {
            return Err(format!("telescoping mismatch at trial {trial}"));
        }
    }
    Ok("telescoping and recombination identities on 200 random tables, k ≤ 5".to_string())
}

pub fn uniform_source() -> Check {
    let src = UniformSource::new(0x7e58, 2);
    if src.u_value(&IndexSet::empty()).unwrap() != 1.0 {
        return Err("empty set must map to exactly 1".to_string());
    }
    let a = src.u_value(&IndexSet::from_entries(&[4, 7])).unwrap();
    let b = src.u_value(&IndexSet::from_entries(&[7, 4])).unwrap();
    if a != b {
        return Err("set encoding is order-sensitive".to_string());
    }
    let values: Vec<f64> =
        (1..=20_000u64).map(|i| src.u_value(&IndexSet::from_entries(&[i])).unwrap()).collect();
    let d = ks_uniform(&values);
    let crit = ks_critical_one_sample_1pct(values.len());
    ensure(
        d < crit,
        format!("KS {d:.5} below 1% critical {crit:.5} on 20k singletons"),
        format!("KS {d:.5} exceeds critical {crit:.5}"),
    )
}

pub fn regeneration() -> Check {
    let src = UniformSource::new(0x7e59, 3);
    for model in builtin_models(3).unwrap() {
        let tuple = IndexTuple::new(vec![9, 2, 5]).unwrap();
        let a = model.sample_entry(&src, &tuple).unwrap();
        let b = model.sample_entry(&src, &tuple).unwrap();
        if a.to_bits() != b.to_bits() {
            return Err(format!("{} does not regenerate bit-identically", model.name()));
        }
    }
    Ok("every builtin regenerates entries bit-identically".to_string())
}

pub fn decomposition_exactness() -> Check {
    let src = UniformSource::new(0x7e5a, 3);
    let mut stream = UniformStream::new(0x7e5b);
    for k in [2usize, 3] {
        for model in [
            ArrayModel::additive_identity(k).unwrap(),
            ArrayModel::fully_degenerate(k).unwrap(),
        ] {
            for _ in 0..10 {
                let mut labels = Vec::new();
                while labels.len() < k {
                    let c = 1 + (stream.next_uniform() * 500.0) as u64;
                    if !labels.contains(&c) {
                        labels.push(c);
                    }
                }
                let tuple = IndexTuple::new(labels).unwrap();
                let comp = hoeffding(&model, &src, &tuple, 0).unwrap();
                if comp.decomposition_residual() > 1e-12 {
                    return Err(format!(
                        "{} k={k}: residual {}",
                        model.name(),
                        comp.decomposition_residual()
                    ));
                }
            }
        }
    }
    Ok("Σ H_ℓ = X exact (≤ 1e−12) for analytic families, k ∈ {2,3}".to_string())
}

pub fn mc_decomposition() -> Check {
    let src = UniformSource::new(0x7e5c, 2);
    let model = ArrayModel::interaction().unwrap();
    let tuple = IndexTuple::new(vec![3, 8]).unwrap();
    let comp = hoeffding_mc(&model, &src, &tuple, 512).unwrap();
    ensure(
        comp.decomposition_residual() < 1e-10 && comp.recombination_discrepancy < 1e-10,
        "shared-redraw Monte Carlo decomposition telescopes exactly".to_string(),
        format!(
            "residual {} / discrepancy {}",
            comp.decomposition_residual(),
            comp.recombination_discrepancy
        ),
    )
}

pub fn q_symmetry() -> Check {
    let src = UniformSource::new(0x7e5d, 2);
    let model = ArrayModel::additive_identity(2).unwrap();
    let tuple = IndexTuple::new(vec![6, 11]).unwrap();
    let e = PatternVector::from_bits(&[1, 1]).unwrap();
    let check = check_q_symmetry(&model, &src, &tuple, &e, &[2, 1], 0).unwrap();
    let refused = check_q_symmetry(
        &model,
        &src,
        &tuple,
        &PatternVector::from_bits(&[1, 0]).unwrap(),
        &[2, 1],
        0,
    )
    .is_err();
    ensure(
        check.holds && refused,
        "Q invariant under pattern-fixing permutations; hypothesis violations refused"
            .to_string(),
        format!("symmetry discrepancy {}", check.discrepancy),
    )
}

pub fn exponent_kink() -> Check {
    let left = normalization_exponent(2, 1.0).unwrap();
    let right = 2.0 / 1.0; // k/r as r → 1 from below
    ensure(
        left == 2.0 && right == 2.0,
        "both exponent formulas equal k at r = 1".to_string(),
        format!("exponent mismatch at the kink: {left} vs {right}"),
    )
}

pub fn streaming_sums() -> Check {
    let model = ArrayModel::additive_identity(2).unwrap();
    let src = UniformSource::new(0x7e5e, 2);
    let n = 5u64;
    let mut naive = 0.0;
    for i in 1..=n {
        for j in 1..=n {
            if i != j {
                naive +=
                    model.sample_entry(&src, &IndexTuple::new(vec![i, j]).unwrap()).unwrap();
            }
        }
    }
    let streamed = streaming_sum(&model, &src, n).unwrap();
    if (streamed - naive).abs() / naive.abs() > 1e-12 {
        return Err(format!("streaming {streamed} vs naive {naive}"));
    }
    let ordered = streaming_sum_ordered(&model, &src, 12).unwrap();
    let full = streaming_sum(&model, &src, 12).unwrap();
    if (full - 2.0 * ordered).abs() / full.abs() > 1e-12 {
        return Err(format!("symmetric identity failed: {full} vs 2·{ordered}"));
    }
    let constant = ArrayModel::constant(2, 2.5).unwrap();
    let counted = streaming_sum(&constant, &src, 9).unwrap();
    ensure(
        (counted - 2.5 * 72.0).abs() < 1e-9,
        "streaming sums match the naive oracle, the k!-identity, and counting".to_string(),
        format!("constant-kernel sum {counted} vs {}", 2.5 * 72.0),
    )
}

pub fn stable_sampler() -> Check {
    let params = StableParams::new(2.0, 0.0, 1.0, 0.0).unwrap();
    let src = UniformSource::new(0x7e5f, 2);
    let n = 20_000u64;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for label in 1..=n {
        let x = sample_stable(&params, &src, label).unwrap();
        sum += x;
        sum_sq += x * x;
    }
    let mean = sum / n as f64;
    let var = sum_sq / n as f64 - mean * mean;
    ensure(
        (var - 2.0).abs() < 0.1,
        format!("Gaussian boundary variance {var:.3} ≈ 2"),
        format!("variance {var:.3} far from 2"),
    )
}

pub fn factorization() -> Check {
    let options = exarray::limits::CounterexampleOptions {
        ks_inner_n: 64,
        ks_samples: 64,
        verify_up_to: 40,
    };
    let report = counterexample(1.5, 2, &[8, 16, 32], 4, 0x7e60, &options).unwrap();
    ensure(
        report.factorization.max_relative_error <= 1e-12,
        "stable-factor sums factor through the label sums exactly (n ≤ 40)".to_string(),
        format!("factorization error {}", report.factorization.max_relative_error),
    )
}

pub fn khintchine() -> Check {
    let single = khintchine_check(&[1.0], 1.5, 64, 1).unwrap();
    if single.ratio != 1.0 {
        return Err(format!("single weight ratio {}", single.ratio));
    }
    let double = khintchine_check(&[1.0, 1.0], 2.0, 10_000, 2).unwrap();
    if (double.exact_ratio.unwrap() - 1.0).abs() > 1e-12 {
        return Err(format!("two-weight exact ratio {:?}", double.exact_ratio));
    }
    let mut stream = UniformStream::new(0x7e61);
    for trial in 0..5u64 {
        let weights: Vec<f64> = (0..7).map(|_| stream.next_uniform() * 2.0 - 1.0).collect();
        let res = khintchine_check(&weights, 1.5, 10_000, trial).unwrap();
        if !res.passed {
            return Err(format!("trial {trial}: ratio {} band {}", res.ratio, res.band));
        }
    }
    Ok("moment-bound ratio ≤ 1 within band; exact enumeration agrees".to_string())
}

pub fn variance_constant() -> Check {
    let model = ArrayModel::additive_identity(2).unwrap();
    let v = estimate_v(&model, 0x7e62, 4000).unwrap();
    let close = (v.conditional - 1.0 / 3.0).abs() < 3.0 * v.conditional_se + 1e-9
        && (v.covariance - 1.0 / 3.0).abs() < 3.0 * v.covariance_se;
    ensure(
        close && v.agree_within(3.0),
        format!("both estimators near 1/3: {:.4} / {:.4}", v.covariance, v.conditional),
        format!("estimates {:.4} / {:.4} off 1/3", v.covariance, v.conditional),
    )
}
