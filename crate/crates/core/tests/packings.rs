use dpminimax_core::packings::gmix_radius_threshold;
use dpminimax_core::*;

fn kary(d: &Distribution) -> &ProbVector {
    d.as_kary().expect("k-ary member")
}

#[test]
fn kary_tv_pairs_follow_codeword_distance() {
    let (k, alpha) = (16usize, 0.01);
    let fam = kary_tv_packing(k, alpha, Some(200)).unwrap();
    let bits: Vec<Vec<bool>> = fam
        .members
        .iter()
        .map(|m| kary(m).probs().iter().map(|&x| x > 1.0 / k as f64).collect())
        .collect();
    for i in 0..fam.len() {
        let s: f64 = kary(&fam.members[i]).probs().iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        for j in i + 1..fam.len() {
            let dh = bits[i].iter().zip(&bits[j]).filter(|(a, b)| a != b).count() as f64;
            let tv = distance(kary(&fam.members[i]), kary(&fam.members[j]), Metric::Tv).unwrap();
            assert!((tv - 24.0 * alpha * dh / k as f64).abs() < 1e-12);
            let kl = distance(kary(&fam.members[i]), kary(&fam.members[j]), Metric::Kl).unwrap();
            assert!(kl < 10_000.0 * alpha * alpha);
        }
    }
    assert!(fam.verify().unwrap().passed);
}

#[test]
fn kary_tv_k40_exhaustive() {
    let r = kary_tv_packing(40, 0.01, Some(500)).unwrap().verify().unwrap();
    assert!(r.min_tv.unwrap() >= 0.03);
    assert!(r.max_kl.unwrap() < 1.0);
    assert!(r.passed);
}

#[test]
fn kary_l2_distances() {
    let fam = kary_l2_packing(100, 0.11, Some(100)).unwrap();
    assert!(fam.guarantee_waived);
    let l = 1.0 / kary(&fam.members[0]).probs().iter().cloned().fold(0.0, f64::max);
    for i in 0..fam.len() {
        for j in i + 1..fam.len() {
            let (p, q) = (kary(&fam.members[i]), kary(&fam.members[j]));
            let dh = p.probs().iter().zip(q.probs()).filter(|(a, b)| a != b).count() as f64;
            let l2 = distance(p, q, Metric::L2).unwrap();
            assert!((l2 - dh.sqrt() / l).abs() < 1e-12);
        }
    }
    // l = 1: members are point masses with disjoint supports
    let p = kary(&fam.members[0]);
    let q = kary(&fam.members[1]);
    assert_eq!(distance(p, q, Metric::Tv).unwrap(), 1.0);
    assert_eq!(distance(p, q, Metric::Kl).unwrap(), f64::INFINITY);
    assert!(fam.verify().unwrap().separation_ok);

    assert!(kary_l2_packing(100, 0.2, None).is_err());
}

#[test]
fn product_packing_caps_by_enumeration() {
    let alpha = 0.05;
    let fam = product_packing(8, 3, alpha, true, Some(40)).unwrap();
    for i in 0..fam.len() {
        for j in i + 1..fam.len() {
            let p = fam.members[i].as_product().unwrap();
            let q = fam.members[j].as_product().unwrap();
            let kl = product_kl(p, q).unwrap();
            let tv = product_tv_exact(p, q, 1 << 24).unwrap();
            assert!(kl <= 4.0 * alpha * alpha + 1e-15);
            assert!(tv <= (kl / 2.0).sqrt() + 1e-12);
            assert!(tv <= 2.0 * 2f64.sqrt() * alpha);
            let differ = p.marginals().iter().zip(q.marginals()).filter(|(a, b)| a != b).count();
            assert!(differ * 2 >= 3);
        }
    }
    let big = product_packing(40, 4, alpha, true, Some(500))
        .unwrap()
        .verify()
        .unwrap();
    assert!(big.max_kl.unwrap() <= 4.0 * alpha * alpha);
}

#[test]
fn gaussian_mixture_packing_invariants() {
    let (k, d, alpha) = (2, 4, 0.1);
    let r = gmix_radius_threshold(k, d, alpha);
    let fam = gaussian_mixture_packing(k, d, alpha, r * 1.01, Some(50), 7).unwrap();
    let report = fam.verify().unwrap();
    assert!(report.max_kl.unwrap() <= 4.0 * alpha * alpha + 1e-12);
    for m in &fam.members {
        let mix = m.as_mixture().unwrap();
        assert!(mix
            .means()
            .iter()
            .all(|mu| dist::l2_norm(mu) <= mix.norm_bound() + 1e-12));
    }
    assert!(gaussian_mixture_packing(k, d, alpha, r * 0.5, Some(50), 7).is_err());
}

#[test]
fn assouad_kary_tv_splits_over_coordinates() {
    let (k, alpha) = (10usize, 0.05);
    let cube = assouad_kary_family(k, alpha, 0).unwrap();
    let signs: Vec<Vec<i8>> = (0u32..32)
        .map(|m| (0..5).map(|i| if (m >> i) & 1 == 1 { -1 } else { 1 }).collect())
        .collect();
    for u in &signs {
        for v in &signs {
            let diff = u.iter().zip(v).filter(|(a, b)| a != b).count() as f64;
            let tv = cube.member_tv(u, v).unwrap();
            assert!((tv - 20.0 * alpha / k as f64 * diff).abs() < 1e-12);
        }
    }
    // p_{+i} marginal: explicit average over all members with e_i = +1
    let i = 2;
    let mut avg = vec![0.0; k];
    let mut count = 0.0;
    for u in signs.iter().filter(|u| u[i] == 1) {
        let m = cube.member(u).unwrap();
        for (a, p) in avg.iter_mut().zip(kary(&m).probs()) {
            *a += p;
        }
        count += 1.0;
    }
    let closed = cube.mixture_marginal(i, 1).unwrap();
    for (s, (a, c)) in avg.iter().zip(kary(&closed).probs()).enumerate() {
        assert!((a / count - c).abs() < 1e-12);
        let expect = match s {
            4 => (1.0 + 10.0 * alpha) / k as f64,
            5 => (1.0 - 10.0 * alpha) / k as f64,
            _ => 1.0 / k as f64,
        };
        assert!((c - expect).abs() < 1e-15);
    }
}

#[test]
fn assouad_product_enumeration() {
    let (d, alpha) = (10usize, 0.005);
    let cube = assouad_product_family(d, alpha, 0).unwrap();
    let u = vec![1i8; d];
    let mut v = u.clone();
    v[0] = -1;
    assert!(cube.member_tv(&u, &v).unwrap() >= 5.0 * alpha / d as f64);
    assert_eq!(cube.member_tv(&u, &u).unwrap(), 0.0);

    // event A = {coordinates in S' are all zero}, S' = first 4 coordinates
    let s = 4;
    let mut w = u.clone();
    for x in w.iter_mut().take(s) {
        *x = -1;
    }
    let prob_a = |e: &[i8]| -> f64 {
        let m = cube.member(e).unwrap();
        let means: Vec<f64> = m
            .as_product()
            .unwrap()
            .marginals()
            .iter()
            .map(|p| p.probs()[1])
            .collect();
        let mut total = 0.0;
        for mask in 0u32..(1 << d) {
            if mask & ((1 << s) - 1) != 0 {
                continue;
            }
            let mut p = 1.0;
            for (j, mu) in means.iter().enumerate() {
                p *= if (mask >> j) & 1 == 1 { *mu } else { 1.0 - mu };
            }
            total += p;
        }
        total
    };
    let df = d as f64;
    let formula = (1.0 - (1.0 - 20.0 * alpha) / df).powi(s as i32) - (1.0 - (1.0 + 20.0 * alpha) / df).powi(s as i32);
    assert!((prob_a(&w) - prob_a(&u) - formula).abs() < 1e-12);
}
