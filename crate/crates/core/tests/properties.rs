use std::f64::consts::TAU;

use fairpia::assembly::{
    collocation_matrix, contraction_diagnostics, gram_matrix_curve, normalization_weights, AssemblyBundle, MuPolicy,
};
use fairpia::datasets::{format_csv, parse_csv, sample_starfish, sample_viviani, PointFile};
use fairpia::geometry::{curvature, curvature_comb, mean_curvature};
use fairpia::iteration::{run, step, step_matrix_form, IterationState, StoppingRule};
use fairpia::oracle::{direct_solve, finite_difference, pseudo_inverse, pseudo_inverse_solution, symmetric_eigen};
use fairpia::spline::basis::basis_all;
use fairpia::spline::{make_knot_vector, select_initial_indices, uniform_params};
use fairpia::{DataSet, Init, KnotVector, Mat, Problem, SplineCurve, SplineSurface};
use proptest::prelude::*;

fn clamped(p: usize, mut inner: Vec<f64>) -> KnotVector<f64> {
    inner.sort_by(f64::total_cmp);
    let mut v = vec![0.0; p + 1];
    v.extend(inner);
    v.extend(vec![1.0; p + 1]);
    KnotVector::new(p, v).unwrap()
}

fn knots() -> impl Strategy<Value = KnotVector<f64>> {
    (1usize..=4, prop::collection::vec(0.01f64..0.99, 0..8)).prop_map(|(p, inner)| clamped(p, inner))
}

/// Knot vectors whose distinct knots are at least 0.02 apart.
fn spread_knots() -> impl Strategy<Value = KnotVector<f64>> {
    (2usize..=4, prop::collection::vec(0.02f64..0.98, 0..6))
        .prop_filter("knots too close", |(_, inner)| {
            let mut s = inner.clone();
            s.sort_by(f64::total_cmp);
            s.windows(2).all(|w| w[1] - w[0] > 0.02)
        })
        .prop_map(|(p, inner)| clamped(p, inner))
}

fn curve_on(kv: KnotVector<f64>, dim: usize, coords: &[f64]) -> SplineCurve<f64> {
    let n = kv.count();
    let control = Mat::from_fn(n, dim, |i, c| coords[(i * dim + c) % coords.len()]);
    SplineCurve::new(kv, control).unwrap()
}

fn coords() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 64)
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn rel(a: &Mat<f64>, b: &Mat<f64>) -> f64 {
    a.sub(b).max_abs() / b.max_abs().max(f64::MIN_POSITIVE)
}

fn random_matrix(rows: usize, cols: usize, vals: &[f64]) -> Mat<f64> {
    Mat::from_fn(rows, cols, |i, j| vals[(i * cols + j) % vals.len()])
}

/// `CᵀC` for a `k × n` matrix `C`; rank at most `k`.
fn gram_of(k: usize, n: usize, vals: &[f64]) -> Mat<f64> {
    let c = random_matrix(k, n, vals);
    c.tr_matmul(&c)
}

/// Twenty wavy planar points, eight cubic control points.
fn small_bundle(wave: f64, omega: Vec<f64>) -> (AssemblyBundle<f64>, Mat<f64>, Mat<f64>) {
    let t = uniform_params::<f64>(20).unwrap();
    let q = Mat::from_fn(20, 2, |i, c| if c == 0 { t[i] } else { (wave * t[i]).sin() });
    let idx = select_initial_indices(20, 8, 3).unwrap();
    let kv = make_knot_vector(&t, &idx, 3).unwrap();
    let bundle = AssemblyBundle::new(
        collocation_matrix(&kv, &t).unwrap(),
        gram_matrix_curve(&kv, 2).unwrap(),
        &q,
        omega,
        &MuPolicy::PerRow,
    )
    .unwrap();
    let p0 = Mat::from_rows(&idx.iter().map(|&i| q.row(i).to_vec()).collect::<Vec<_>>());
    (bundle, q, p0)
}

fn rotation2(a: f64) -> Mat<f64> {
    Mat::from_rows(&[[a.cos(), -a.sin()], [a.sin(), a.cos()]])
}

fn rotation3(a: f64, b: f64) -> Mat<f64> {
    let rz = Mat::from_rows(&[[a.cos(), -a.sin(), 0.0], [a.sin(), a.cos(), 0.0], [0.0, 0.0, 1.0]]);
    let rx = Mat::from_rows(&[[1.0, 0.0, 0.0], [0.0, b.cos(), -b.sin()], [0.0, b.sin(), b.cos()]]);
    rz.matmul(&rx)
}

/// Rotates the rows of `control` by `rot` and shifts them by `shift`.
fn moved(control: &Mat<f64>, rot: &Mat<f64>, shift: &[f64]) -> Mat<f64> {
    let r = control.matmul(&rot.transpose());
    Mat::from_fn(r.rows(), r.cols(), |i, c| r.row(i)[c] + shift[c])
}

proptest! {
    #[test]
    fn partition_of_unity(kv in knots(), t in 0.0f64..=1.0) {
        let sum: f64 = basis_all(&kv, t, 0).unwrap().iter().map(|(_, v)| v).sum();
        prop_assert!((sum - 1.0).abs() < 1e-12, "sum {sum}");
    }

    #[test]
    fn local_support_is_exact(kv in knots(), t in 0.0f64..=1.0) {
        let n = kv.count();
        let p = kv.degree();
        let dense = basis_all(&kv, t, 0).unwrap().to_dense(n);
        for (j, v) in dense.iter().enumerate() {
            let k = kv.knots();
            if t < k[j] || t > k[j + p + 1] {
                prop_assert_eq!(*v, 0.0);
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences(kv in spread_knots(), c in coords(), t in 0.001f64..0.999) {
        let near_knot = kv.knots().iter().any(|k| (k - t).abs() < 1e-4);
        prop_assume!(!near_knot);
        let curve = curve_on(kv.clone(), 2, &c);
        let h = 1e-6;
        for r in 1..=kv.degree().min(3) {
            let exact = curve.eval(t, r).unwrap();
            let fd = finite_difference(|s| curve.eval(s, r - 1).unwrap(), t, 1, h).unwrap();
            let scale = exact.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            prop_assert!(max_gap(&exact, &fd) <= 1e-6 * scale, "r={r}: {exact:?} vs {fd:?}");
        }
    }

    #[test]
    fn knot_insertion_keeps_the_shape(kv in knots(), c in coords(), u in 0.001f64..0.999) {
        let curve = curve_on(kv, 2, &c);
        prop_assume!(curve.knots().multiplicity(u) < curve.degree());
        let refined = curve.insert_knot(u).unwrap();
        prop_assert_eq!(refined.control_count(), curve.control_count() + 1);
        let dev = curve
            .sample(200)
            .iter()
            .zip(refined.sample(200))
            .fold(0.0f64, |m, (a, b)| m.max(max_gap(a, &b)));
        prop_assert!(dev < 1e-12, "deviation {dev}");
    }

    #[test]
    fn gram_and_normal_matrices_are_banded(kv in knots(), r in 1usize..=3) {
        prop_assume!(r <= kv.degree());
        let p = kv.degree();
        let d = gram_matrix_curve(&kv, r).unwrap();
        let t = uniform_params::<f64>(50).unwrap();
        let ntn = collocation_matrix(&kv, &t).unwrap().normal_matrix();
        let n = kv.count();
        for j in 0..n {
            for l in 0..n {
                if j.abs_diff(l) > p {
                    prop_assert_eq!(d.matrix()[(j, l)], 0.0);
                    prop_assert_eq!(ntn[(j, l)], 0.0);
                }
            }
        }
    }

    #[test]
    fn gram_annihilates_low_degree_polynomials(kv in knots(), r in 1usize..=3) {
        prop_assume!(r <= kv.degree());
        let d = gram_matrix_curve(&kv, r).unwrap();
        let n = kv.count();
        // constants, and for r ≥ 2 the identity map through its Greville abscissae
        let mut polys = vec![vec![1.0; n]];
        if r >= 2 {
            polys.push(kv.greville());
        }
        for coeffs in polys {
            let v = Mat::from_vec(n, 1, coeffs);
            let residual = d.matrix().matmul(&v).max_abs();
            let scale = d.matrix().norm_inf() * v.max_abs();
            prop_assert!(residual <= 1e-9 * scale, "residual {residual} vs {scale}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn sdd_matrices_contract_under_row_normalization(vals in prop::collection::vec(-1.0f64..1.0, 400), extra in prop::collection::vec(0.01f64..2.0, 20)) {
        let n = 20;
        let mut a = random_matrix(n, n, &vals);
        for i in 0..n {
            let off: f64 = (0..n).filter(|&j| j != i).map(|j| a[(i, j)].abs()).sum();
            a[(i, i)] = off + extra[i];
        }
        let lambda = normalization_weights(&a, &MuPolicy::PerRow).unwrap();
        let diag = contraction_diagnostics(&a, &lambda);
        prop_assert!(diag.sdd);
        prop_assert!(diag.inf_norm > 0.0 && diag.inf_norm < 1.0, "{}", diag.inf_norm);
    }

    #[test]
    fn per_point_and_matrix_updates_agree(wave in 1.0f64..8.0, omega in prop::collection::vec(0.0f64..1.0, 8), k in 1usize..20) {
        let (bundle, q, p0) = small_bundle(wave, omega);
        let mut state = IterationState::new(p0);
        for _ in 0..k {
            let a = step(&bundle, &q, &state).unwrap();
            let b = step_matrix_form(&bundle, &state).unwrap();
            prop_assert!(a.control.sub(&b.control).max_abs() <= 1e-12 * (1.0 + b.control.max_abs()));
            state = a;
        }
    }

    #[test]
    fn solution_is_a_fixed_point(wave in 1.0f64..8.0, omega in prop::collection::vec(0.0f64..0.9, 8)) {
        let (bundle, q, _) = small_bundle(wave, omega);
        let star = direct_solve(&bundle.a, &bundle.rhs).unwrap();
        let next = step(&bundle, &q, &IterationState::new(star.clone())).unwrap();
        prop_assert!(next.control.sub(&star).max_abs() <= 1e-12 * (1.0 + star.max_abs()));
    }

    #[test]
    fn normalized_psd_spectrum_lies_in_zero_two(k in 2usize..10, vals in prop::collection::vec(-1.0f64..1.0, 100), frac in prop::collection::vec(0.01f64..0.999, 10)) {
        let n = 10;
        let b = gram_of(k, n, &vals);
        let lmax = symmetric_eigen(&b).unwrap().eigenvalues[0];
        prop_assume!(lmax > 1e-9);
        let mu: Vec<f64> = frac.iter().map(|f| f * 2.0 / lmax).collect();
        // Λ^{1/2} B Λ^{1/2} is similar to ΛB and symmetric
        let half: Vec<f64> = mu.iter().map(|m| m.sqrt()).collect();
        let s = Mat::from_fn(n, n, |i, j| half[i] * b[(i, j)] * half[j]);
        for beta in symmetric_eigen(&s).unwrap().eigenvalues {
            prop_assert!(beta > -1e-10 && beta < 2.0, "eigenvalue {beta}");
        }
    }

    #[test]
    fn pseudo_inverse_identities(k in 1usize..8, vals in prop::collection::vec(-1.0f64..1.0, 64)) {
        let b = gram_of(k, 8, &vals);
        prop_assume!(b.max_abs() > 1e-6);
        let pinv = pseudo_inverse(&b).unwrap();
        prop_assert!(rel(&b.matmul(&pinv).matmul(&b), &b) < 1e-8);
        prop_assert!(rel(&pinv.matmul(&b).matmul(&pinv), &pinv) < 1e-8);
    }

    #[test]
    fn direct_and_pseudo_inverse_solvers_agree(vals in prop::collection::vec(-1.0f64..1.0, 64), rhs in prop::collection::vec(-1.0f64..1.0, 16), omega in 0.0f64..0.9) {
        let b = gram_of(8, 8, &vals).add(&Mat::identity(8));
        let rhs = Mat::from_vec(8, 2, rhs);
        let direct = direct_solve(&b, &rhs.scale(1.0 - omega)).unwrap();
        let pinv = pseudo_inverse_solution(&b, &rhs, omega).unwrap();
        prop_assert!(pinv.consistent);
        prop_assert!(rel(&pinv.solution, &direct) < 1e-9);
    }

    #[test]
    fn jacobi_reconstructs_symmetric_matrices(n in 1usize..12, vals in prop::collection::vec(-5.0f64..5.0, 144)) {
        let m = random_matrix(n, n, &vals);
        let b = m.add(&m.transpose());
        let eig = symmetric_eigen(&b).unwrap();
        prop_assert!(eig.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(b.sub(&eig.reconstruct()).max_abs() <= 1e-10 * (1.0 + b.max_abs()));
        let vtv = eig.eigenvectors.tr_matmul(&eig.eigenvectors);
        prop_assert!(vtv.sub(&Mat::identity(n)).max_abs() < 1e-10);
    }

    #[test]
    fn curvature_ignores_rigid_motion(kv in spread_knots(), c in coords(), a in 0.0..TAU, b in 0.0..TAU, shift in prop::collection::vec(-3.0f64..3.0, 3), t in 0.0f64..=1.0) {
        for dim in [2, 3] {
            let curve = curve_on(kv.clone(), dim, &c);
            let Ok(k0) = curvature(&curve, t) else { continue };
            let rot = if dim == 2 { rotation2(a) } else { rotation3(a, b) };
            let other = SplineCurve::new(kv.clone(), moved(curve.control(), &rot, &shift[..dim])).unwrap();
            let k1 = curvature(&other, t).unwrap();
            prop_assert!((k0 - k1).abs() <= 1e-10 * k0.max(1.0), "dim {dim}: {k0} vs {k1}");
        }
    }

    #[test]
    fn mean_curvature_magnitude_ignores_rigid_motion(h in prop::collection::vec(-0.3f64..0.3, 16), a in 0.0..TAU, b in 0.0..TAU, shift in prop::collection::vec(-3.0f64..3.0, 3), s in 0.05f64..0.95, t in 0.05f64..0.95) {
        let kv = KnotVector::bezier(3);
        // a height field over the unit square stays regular
        let control = Mat::from_fn(16, 3, |j, c| match c {
            0 => (j / 4) as f64 / 3.0,
            1 => (j % 4) as f64 / 3.0,
            _ => h[j],
        });
        let surf = SplineSurface::new(kv.clone(), kv.clone(), control.clone()).unwrap();
        let other = SplineSurface::new(kv.clone(), kv, moved(&control, &rotation3(a, b), &shift)).unwrap();
        let h0 = mean_curvature(&surf, s, t).unwrap().abs();
        let h1 = mean_curvature(&other, s, t).unwrap().abs();
        prop_assert!((h0 - h1).abs() <= 1e-10 * h0.max(1.0), "{h0} vs {h1}");
    }

    #[test]
    fn comb_is_deterministic(kv in knots(), c in coords(), count in 2usize..300) {
        let curve = curve_on(kv, 2, &c);
        prop_assert_eq!(curvature_comb(&curve, count, 0.01).unwrap(), curvature_comb(&curve, count, 0.01).unwrap());
    }

    #[test]
    fn noiseless_viviani_lies_on_both_surfaces(m in 4usize..600) {
        let data = sample_viviani::<f64>(m, 0.0, 0).unwrap();
        for p in data.points().row_vecs() {
            let (x, y, z) = (p[0], p[1], p[2]);
            prop_assert!((x * x + y * y + z * z - 25.0).abs() < 1e-12);
            prop_assert!((x * x + y * y - 5.0 * x).abs() < 1e-12);
        }
    }

    #[test]
    fn samplers_are_seeded(m in 4usize..200, seed in any::<u64>()) {
        let a = sample_viviani::<f64>(m, 0.05, seed).unwrap();
        prop_assert_eq!(&a, &sample_viviani::<f64>(m, 0.05, seed).unwrap());
        prop_assert_ne!(&a, &sample_viviani::<f64>(m, 0.05, seed.wrapping_add(1)).unwrap());
    }

    #[test]
    fn point_files_round_trip(rows in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 3), 2..40), with_params in any::<bool>()) {
        let m = rows.len();
        let params = with_params.then(|| (0..m).map(|i| i as f64 / (m - 1) as f64).collect::<Vec<_>>());
        let file = PointFile { dim: 3, points: rows, params };
        prop_assert_eq!(&parse_csv(&format_csv(&file)).unwrap(), &file);
        let json = serde_json::to_string(&file).unwrap();
        prop_assert_eq!(&serde_json::from_str::<PointFile>(&json).unwrap(), &file);
    }

    #[test]
    fn datasets_round_trip_through_json(rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 2), 2..30)) {
        let m = rows.len();
        let params: Vec<f64> = (0..m).map(|i| i as f64 / (m - 1) as f64).collect();
        let data = DataSet::new(Mat::from_rows(&rows), params).unwrap();
        let back: DataSet<f64> = serde_json::from_str(&serde_json::to_string(&data).unwrap()).unwrap();
        prop_assert_eq!(back, data);
    }
}

#[test]
fn single_precision_run_lowers_energy() {
    let data = sample_starfish::<f32>(100).unwrap();
    let problem = Problem::curve(data, 34, 3).unwrap();
    let bundle = problem.bundle(2, vec![1e-5f32; 34], &MuPolicy::PerRow).unwrap();
    let (_, trace) =
        run(&bundle, problem.data_points(), problem.initial_state(Init::Data), &StoppingRule::default()).unwrap();
    assert!(trace.last().energy_abs < trace.first().energy_abs);
    assert!(trace.last().fit_abs.is_finite());
}
