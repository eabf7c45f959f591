//! Property tests for marking, refinement, kernels and literals.

use hyperbem::adapt::{dorfler_mark, ErrorIndicators};
use hyperbem::config::{format_complex, parse_complex};
use hyperbem::geometry::{Curve, Mesh};
use hyperbem::kernels::KernelContext;
use hyperbem::medium::MaterialPair;
use hyperbem::Complex64;
use proptest::prelude::*;

fn indicators(rho: &[(f64, f64)]) -> ErrorIndicators {
    ErrorIndicators::from_parts(rho.iter().map(|r| r.0).collect(), rho.iter().map(|r| r.1).collect()).unwrap()
}

fn ex1_kernel() -> KernelContext {
    let mat = MaterialPair::new(Complex64::new(-1.0, 0.01), Complex64::new(1.0, 0.01)).unwrap();
    KernelContext::new(mat, 1.0).unwrap()
}

proptest! {
    #[test]
    fn dorfler_set_reaches_the_bulk_and_is_minimal(
        rho in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..80),
        gamma in 0.05f64..0.95,
    ) {
        let ind = indicators(&rho);
        let totals = ind.totals();
        let all: f64 = totals.iter().sum();
        let marked = dorfler_mark(&ind, gamma).unwrap();
        prop_assert!(!marked.is_empty());
        prop_assert!(marked.windows(2).all(|w| w[0] < w[1]));
        let mass: f64 = marked.iter().map(|&i| totals[i]).sum();
        prop_assert!(mass >= gamma * all || marked.len() == totals.len());
        // Dropping the smallest marked element falls short of the bulk.
        let smallest = marked.iter().map(|&i| totals[i]).fold(f64::INFINITY, f64::min);
        prop_assert!(marked.len() == 1 || mass - smallest < gamma * all);
        // Every unmarked indicator is no larger than every marked one.
        let largest_unmarked = (0..totals.len())
            .filter(|i| marked.binary_search(i).is_err())
            .map(|i| totals[i])
            .fold(0.0, f64::max);
        prop_assert!(largest_unmarked <= smallest);
    }

    #[test]
    fn dorfler_set_ignores_a_common_scale(
        rho in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..60),
        scale in prop::sample::select(vec![0.25, 0.5, 2.0, 4.0, 1024.0]),
    ) {
        // Powers of two keep every sum exact, so the comparison is strict.
        let scaled: Vec<(f64, f64)> = rho.iter().map(|&(a, b)| (a * scale, b * scale)).collect();
        prop_assert_eq!(dorfler_mark(&indicators(&rho), 0.5).unwrap(), dorfler_mark(&indicators(&scaled), 0.5).unwrap());
    }

    #[test]
    fn bisection_adds_one_node_per_marked_element(
        m0 in 8usize..60,
        picks in prop::collection::vec(0usize..1000, 0..30),
    ) {
        let mesh = Mesh::initial(Curve::ellipse(2.0, 1.0).unwrap(), m0).unwrap();
        let mut marked: Vec<usize> = picks.iter().map(|p| p % m0).collect();
        marked.sort_unstable();
        marked.dedup();
        let fine = mesh.bisect_elements(&marked).unwrap();
        prop_assert_eq!(fine.len(), m0 + marked.len());
        prop_assert!(fine.nodes().windows(2).all(|w| w[0] < w[1]));
        // Chords of a convex curve lengthen under refinement and stay below the perimeter.
        prop_assert!(fine.total_length() >= mesh.total_length() - 1e-14);
        prop_assert!(fine.total_length() <= mesh.curve().perimeter() + 1e-12);
        let parents = fine.parents().unwrap();
        for (k, e) in fine.elements().iter().enumerate() {
            let p = mesh.element(parents[k]);
            prop_assert!(e.t_start >= p.t_start && e.t_end <= p.t_end);
            let split = marked.binary_search(&parents[k]).is_ok();
            prop_assert_eq!(e.depth, p.depth + split as u32);
        }
    }

    #[test]
    fn kernel_is_even_and_conormals_are_reciprocal(
        x in (-2.0f64..2.0, -2.0f64..2.0),
        y in (-2.0f64..2.0, -2.0f64..2.0),
        angle in 0.0f64..std::f64::consts::TAU,
    ) {
        let (x, y) = ([x.0, x.1], [y.0, y.1]);
        prop_assume!((x[0] - y[0]).hypot(x[1] - y[1]) > 1e-3);
        let ctx = ex1_kernel();
        let nu = [angle.cos(), angle.sin()];
        let Ok(a) = ctx.phi(x, y) else { return Ok(()) };
        prop_assert_eq!(a, ctx.phi(y, x).unwrap());
        let b = ctx.dphi_dnu_y(x, y, nu).unwrap();
        let c = ctx.dphi_dnu_x(y, x, nu).unwrap();
        prop_assert!((b - c).norm() <= 1e-12 * b.norm().max(1e-300));
    }

    #[test]
    fn complex_literals_round_trip(re in -1e6f64..1e6, im in -1e6f64..1e6, zero in 0u8..3) {
        let z = match zero {
            0 => Complex64::new(re, 0.0),
            1 => Complex64::new(0.0, im),
            _ => Complex64::new(re, im),
        };
        prop_assert_eq!(parse_complex(&format_complex(z)), Some(z));
    }
}
