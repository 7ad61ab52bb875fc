use proptest::prelude::*;

use ssmlab::cot::{LimbCodec, MemoryEncoding};
use ssmlab::ring::{AffineMap, BitString, Budget, Order, Precision, RingMatrix, RingVector};
use ssmlab::task::CompositionInstance;
use ssmlab::{Token, TokenKind};

fn precision() -> impl Strategy<Value = Precision> {
    (1u32..=64).prop_map(|b| Precision::new(b).unwrap())
}

fn affine(d: usize, p: Precision) -> impl Strategy<Value = AffineMap> {
    (
        prop::collection::vec(any::<u64>(), d * d),
        prop::collection::vec(any::<u64>(), d),
    )
        .prop_map(move |(a, b)| {
            let a = a.into_iter().map(|v| v & p.mask()).collect();
            let b = b.into_iter().map(|v| v & p.mask()).collect();
            AffineMap::new(RingMatrix::new(p, d, a).unwrap(), RingVector::new(p, b).unwrap()).unwrap()
        })
}

fn vector(d: usize, p: Precision) -> impl Strategy<Value = RingVector> {
    prop::collection::vec(any::<u64>(), d)
        .prop_map(move |v| RingVector::wrapping(p, v))
}

fn setup() -> impl Strategy<Value = (AffineMap, AffineMap, AffineMap, RingVector)> {
    (1usize..=4, precision()).prop_flat_map(|(d, p)| (affine(d, p), affine(d, p), affine(d, p), vector(d, p)))
}

proptest! {
    #[test]
    fn composition_is_sequential_application((f, g, _h, x) in setup()) {
        let gf = g.compose(&f).unwrap();
        prop_assert_eq!(gf.apply(&x).unwrap(), g.apply(&f.apply(&x).unwrap()).unwrap());
    }

    #[test]
    fn composition_is_associative((f, g, h, _x) in setup()) {
        let left = h.compose(&g).unwrap().compose(&f).unwrap();
        let right = h.compose(&g.compose(&f).unwrap()).unwrap();
        prop_assert_eq!(left, right);
    }

    #[test]
    fn identity_is_neutral((f, _g, _h, _x) in setup()) {
        let id = AffineMap::identity(f.dim(), f.precision());
        prop_assert_eq!(f.compose(&id).unwrap(), f.clone());
        prop_assert_eq!(id.compose(&f).unwrap(), f);
    }

    #[test]
    fn serialization_round_trips((f, _g, _h, _x) in setup()) {
        let bits = f.to_bits();
        prop_assert_eq!(bits.len(), AffineMap::serialized_bits(f.dim(), f.precision()));
        prop_assert_eq!(AffineMap::from_bits(f.dim(), f.precision(), &bits).unwrap(), f.clone());
        let hex = bits.to_hex();
        prop_assert_eq!(BitString::from_hex(&hex, bits.len()).unwrap(), bits);
    }

    #[test]
    fn power_matches_repeated_composition((f, _g, _h, x) in setup(), k in 0u64..12) {
        let mut y = x.clone();
        for _ in 0..k {
            y = f.apply(&y).unwrap();
        }
        prop_assert_eq!(f.pow(k).apply(&x).unwrap(), y);
    }

    #[test]
    fn small_orders_agree_with_iteration(f in (1usize..=2, 1u32..=2)
        .prop_flat_map(|(d, b)| affine(d, Precision::new(b).unwrap())))
    {
        let table = f.function_table(Budget::DEFAULT).unwrap();
        match f.order() {
            Order::Finite(k) => {
                prop_assert!(f.pow(k).is_identity());
                for j in 1..k {
                    prop_assert!(!f.pow(j).eq_as_function(&AffineMap::identity(f.dim(), f.precision()), Budget::DEFAULT).unwrap());
                }
            }
            Order::NotPermutation => {
                let distinct: std::collections::HashSet<_> = table.iter().collect();
                prop_assert!(distinct.len() < table.len());
            }
        }
    }

    #[test]
    fn row_major_encoding_round_trips(n in 1usize..6, k in 1usize..5, seed in any::<u64>()) {
        let mut rng = ssmlab::random::seeded(seed);
        let inst = ssmlab::task::random_instance(&mut rng, n, k);
        let stream = inst.encode_row_major();
        prop_assert_eq!(stream.len(), 1 + n * k);
        prop_assert_eq!(stream.decode().unwrap(), inst.clone());
        prop_assert_eq!(CompositionInstance::from_text(&inst.to_text()).unwrap(), inst);
    }

    #[test]
    fn limb_codec_round_trips(bits in 1u32..=64, limb in 1u32..=64, width in 1usize..4, kinds in any::<bool>(),
        raw in prop::collection::vec(any::<u64>(), 4), code in 0u64..4)
    {
        let codec = LimbCodec { width, bits, kinds, limb_bits: limb };
        let mask = if bits == 64 { u64::MAX } else { (1 << bits) - 1 };
        let kind = if kinds { TokenKind::from_code(code).unwrap() } else { TokenKind::Data };
        let x = Token::new(kind, raw[..width].iter().map(|v| v & mask).collect());
        let limbs = codec.encode(&x).unwrap();
        prop_assert_eq!(limbs.len(), codec.len());
        let limb_mask = if limb == 64 { u64::MAX } else { (1 << limb) - 1 };
        prop_assert!(limbs.iter().all(|&l| l & !limb_mask == 0));
        prop_assert_eq!(codec.decode(&limbs).unwrap(), x);
    }

    #[test]
    fn memory_encoding_round_trips(bools in prop::collection::vec(any::<bool>(), 0..40), d in 1usize..5, extra in 0u32..4) {
        let s = bools.len();
        let p = ((s as u32).div_ceil(d as u32) + extra).clamp(1, 64);
        let enc = MemoryEncoding::new(s, d, Precision::new(p).unwrap()).unwrap();
        let m = BitString::from_bools(bools);
        let h = enc.encode(&m).unwrap();
        prop_assert_eq!(enc.decode(&h).unwrap(), m);
    }
}
