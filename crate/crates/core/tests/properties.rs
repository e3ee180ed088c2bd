use std::f64::consts::{FRAC_PI_2, PI};

use openarms::arm::{open_arms_chain, write_chain_config, parse_chain_config, Profile};
use openarms::cornell::{inpaint, DepthImage};
use openarms::grasp::{
    angle_difference, decode_angle, encode_angle, grasp_success, iou, rect_from_pixel, wrap_half_pi, GraspPixel,
    GraspRectangle,
};
use openarms::nn::{read_weights, write_weights, Tensor, WeightBundle};
use proptest::prelude::*;

fn rect() -> impl Strategy<Value = GraspRectangle> {
    (0.0..200.0f64, 0.0..200.0f64, -PI..PI, 2.0..80.0f64, 2.0..40.0f64)
        .prop_map(|(u, v, a, w, h)| GraspRectangle::new((u, v), a, w, h))
}

proptest! {
    #[test]
    fn iou_is_symmetric_and_bounded(a in rect(), b in rect()) {
        let (ab, ba) = (iou(&a, &b), iou(&b, &a));
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(iou(&a, &a), 1.0);
    }

    #[test]
    fn half_turn_is_the_same_grasp(a in rect(), b in rect()) {
        let flipped = GraspRectangle::new(a.center, a.angle + PI, a.width, a.height);
        prop_assert!(angle_difference(a.angle, flipped.angle) < 1e-12);
        prop_assert!((iou(&a, &b) - iou(&flipped, &b)).abs() < 1e-9);
        prop_assert_eq!(grasp_success(&a, &[b]).unwrap(), grasp_success(&flipped, &[b]).unwrap());
    }

    #[test]
    fn angle_encoding_round_trips(phi in -10.0..10.0f64) {
        let (c, s) = encode_angle(phi);
        let back = decode_angle(c, s).unwrap();
        prop_assert!(back > -FRAC_PI_2 && back <= FRAC_PI_2);
        prop_assert!(angle_difference(back, phi) < 1e-9);
        prop_assert!(angle_difference(wrap_half_pi(phi), phi) < 1e-9);
    }

    #[test]
    fn pixel_rect_keeps_center_and_angle(u in 0.0..400.0f64, v in 0.0..400.0f64, phi in -FRAC_PI_2..FRAC_PI_2, w in 1.0..150.0f64) {
        let r = rect_from_pixel(&GraspPixel { center: (u, v), phi, omega: w, quality: 1.0 }, 0.5).unwrap();
        prop_assert_eq!(r.center, (u, v));
        prop_assert!(angle_difference(r.angle, phi) < 1e-12);
        prop_assert!((r.height - 0.5 * w).abs() < 1e-12);
    }

    #[test]
    fn clamp_is_idempotent(q in prop::collection::vec(-6.0..6.0f64, 7)) {
        let chain = open_arms_chain(&Profile::Default).unwrap();
        let once = chain.clamp_to_limits(&q).unwrap();
        prop_assert!(chain.within_limits(&once));
        prop_assert_eq!(chain.clamp_to_limits(&once).unwrap(), once);
    }

    #[test]
    fn fk_orientation_is_unit(q in prop::collection::vec(-3.0..3.0f64, 7)) {
        let chain = open_arms_chain(&Profile::Default).unwrap();
        let p = chain.forward_kinematics(&q).unwrap();
        prop_assert!((p.orientation.coords.norm() - 1.0).abs() < 1e-12);
        let reparsed = parse_chain_config(&write_chain_config(&chain)).unwrap();
        let r = reparsed.forward_kinematics(&q).unwrap();
        prop_assert!((p.position - r.position).norm() < 1e-9);
    }

    #[test]
    fn inpaint_is_idempotent(
        (w, h, values, valid) in (2usize..12, 2usize..12).prop_flat_map(|(w, h)| (
            Just(w),
            Just(h),
            prop::collection::vec(0.3..1.5f64, w * h),
            prop::collection::vec(prop::bool::weighted(0.7), w * h),
        ))
    ) {
        prop_assume!(valid.iter().any(|&v| v));
        let d = DepthImage::with_mask(w, h, values, valid.clone()).unwrap();
        let once = inpaint(&d).unwrap();
        prop_assert!(once.is_fully_valid());
        for (i, &ok) in valid.iter().enumerate() {
            if ok {
                prop_assert_eq!(once.values()[i], d.values()[i]);
            }
        }
        prop_assert_eq!(inpaint(&once).unwrap(), once);
    }

    #[test]
    fn weights_round_trip(shapes in prop::collection::vec(prop::collection::vec(1usize..5, 1..4), 0..5), fill in -1.0e3..1.0e3f32) {
        let mut bundle = WeightBundle::new();
        for (i, shape) in shapes.iter().enumerate() {
            let n: usize = shape.iter().product();
            let data = (0..n).map(|k| fill * k as f32).collect();
            bundle.insert(format!("t{i}.weight"), Tensor::new(shape.clone(), data).unwrap());
        }
        prop_assert_eq!(read_weights(&write_weights(&bundle)).unwrap(), bundle);
    }
}
