//! Symbolic coding of a hyperbolic envelope around a finitary seed.
//!
//! The geometric backend is the suspended cat map, whose section dynamics
//! has exact brackets: cross section and su-rectangles, constant selection,
//! refined alphabets `R_N`, the shadowing map `psi` on admissible codes and
//! the envelope built from the transition graph on `R_{2 N0}`. The bracket
//! recursion behind `psi` is generic over [`SectionDynamics`], and the Markov
//! models run it through the symbolic backend [`SymbolicDynamics`].

pub mod constants;
pub mod envelope;
pub mod section;
pub mod seed;
pub mod shadow;

pub use constants::{choose_constants, CodingConstants, DEFAULT_BETA};
pub use envelope::{
    build_envelope, code_half_length, Check, CodedSet, Edge, EnvelopeDescriptor, EnvelopeOptions, ShadowSample,
    TransitionGraph, VerificationReport,
};
pub use section::{
    build_cross_section, first_return, refine, Alphabet, CrossSection, Letter, ReturnOutcome, SuRectangle,
};
pub use seed::{Connection, Seed, SeedPoint, SeedSpec};
pub use shadow::{
    shadow, shadow_sequence, AdmissibleSequence, SectionDynamics, ShadowOutcome, ShadowRun, SymbolWindow,
    SymbolicDynamics,
};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{FlowModel, ToralModel};

    struct Fixture {
        seed: Seed,
        section: CrossSection,
        constants: CodingConstants,
        alphabet: Alphabet,
    }

    fn fixture() -> Fixture {
        let model = FlowModel::Toral(ToralModel::cat());
        let seed = Seed::new(model.as_toral().unwrap(), &SeedSpec::two_orbit()).unwrap();
        let section = build_cross_section(&model, &seed, 0.2).unwrap();
        let constants = choose_constants(&model, &seed, &section, 0.25, DEFAULT_BETA).unwrap();
        let alphabet = refine(&section, &seed, 2 * constants.n0);
        Fixture {
            seed,
            section,
            constants,
            alphabet,
        }
    }

    fn seed_code(f: &Fixture, p: SeedPoint) -> AdmissibleSequence {
        let half = code_half_length(&f.constants) as i64;
        let code = AdmissibleSequence::of_seed(&f.alphabet, &f.section, &f.seed, p, half).unwrap();
        code.verify(&f.alphabet, &f.seed).unwrap();
        code
    }

    #[test]
    fn constant_code_maps_to_the_fixed_point() {
        let f = fixture();
        let code = seed_code(&f, SeedPoint::Periodic { orbit: 0, index: 0 });
        assert!(code.letters.iter().all(|&a| a == code.letter(0)));
        let out = shadow_sequence(&code, &f.seed, &f.constants).unwrap();
        assert!(f.seed.model.torus_distance(out.point, [0.0, 0.0]) < 1e-12);
        assert!(out.certified);
    }

    #[test]
    fn period_two_code_maps_to_the_period_two_point() {
        let f = fixture();
        let code = seed_code(&f, SeedPoint::Periodic { orbit: 1, index: 0 });
        assert_ne!(code.letter(0), code.letter(1));
        assert_eq!(code.letter(0), code.letter(2));
        let out = shadow_sequence(&code, &f.seed, &f.constants).unwrap();
        // Oracle: (I - A^2) x = 0 mod 1 has the solution (1/5, 2/5) on this orbit.
        assert!(f.seed.model.torus_distance(out.point, [0.2, 0.4]) < 1e-9);
    }

    #[test]
    fn connecting_code_maps_to_the_connecting_point() {
        let f = fixture();
        for k in [-3, 0, 2] {
            let p = SeedPoint::Connection { connection: 1, k };
            let out = shadow_sequence(&seed_code(&f, p), &f.seed, &f.constants).unwrap();
            assert!(f.seed.model.torus_distance(out.point, f.seed.position(p)) < 1e-9);
            assert!(out.final_move < 1e-12);
        }
    }

    #[test]
    fn codes_differing_at_zero_have_distinct_images() {
        let f = fixture();
        let a = seed_code(&f, SeedPoint::Periodic { orbit: 0, index: 0 });
        let b = seed_code(&f, SeedPoint::Connection { connection: 0, k: 0 });
        assert_ne!(a.letter(0), b.letter(0));
        let (pa, pb) = (
            shadow_sequence(&a, &f.seed, &f.constants).unwrap(),
            shadow_sequence(&b, &f.seed, &f.constants).unwrap(),
        );
        let m = &f.seed.model;
        assert!(m.torus_distance(pa.point, pb.point) > f.constants.epsilon);
        let la = f.alphabet.letter_of_point(m, &f.section, pa.point);
        let lb = f.alphabet.letter_of_point(m, &f.section, pb.point);
        assert_eq!((la, lb), (Some(a.letter(0)), Some(b.letter(0))));
    }

    #[test]
    fn broken_witness_chain_is_rejected() {
        let f = fixture();
        let mut code = seed_code(&f, SeedPoint::Periodic { orbit: 0, index: 0 });
        code.witnesses[code.origin + 1] = SeedPoint::Periodic { orbit: 1, index: 0 };
        assert_eq!(code.verify(&f.alphabet, &f.seed).unwrap_err().code(), "E_PRECONDITION");
    }

    #[test]
    fn non_toral_models_are_rejected() {
        let model = crate::models::catalog::get("M2").unwrap();
        let seed = Seed::new(&ToralModel::cat(), &SeedSpec::two_orbit()).unwrap();
        assert_eq!(
            build_cross_section(&model, &seed, 0.2).unwrap_err().code(),
            "E_PRECONDITION"
        );
    }
}
