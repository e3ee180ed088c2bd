use nalgebra::Vector3;

use super::{ChainError, JointSpec, KinematicChain, Transform};

/// Joint names of the 7-DoF arm, shoulder to wrist, with their range of
/// motion in degrees.
pub const OPEN_ARMS_JOINTS: [(&str, f64); 7] = [
    ("shoulder_pitch", 180.0),
    ("shoulder_roll", 180.0),
    ("shoulder_yaw", 120.0),
    ("elbow_pitch", 127.0),
    ("wrist_yaw", 180.0),
    ("wrist_roll", 40.0),
    ("wrist_pitch", 45.0),
];

/// Link lengths and limit placement for the 7-DoF arm.
///
/// The nominal values approximate a medium-sized adult arm. They are
/// configurable defaults, not measurements of the hardware.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmProfile {
    pub upper_arm: f64,
    pub forearm: f64,
    pub hand: f64,
    /// Center of each joint's range in degrees; the range itself is fixed.
    pub limit_centers_deg: [f64; 7],
}

impl Default for ArmProfile {
    fn default() -> Self {
        Self {
            upper_arm: 0.28,
            forearm: 0.25,
            hand: 0.10,
            limit_centers_deg: [0.0; 7],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    Default,
    /// Looked up by name; only `"default"` ships.
    Named(String),
    Custom(ArmProfile),
}

/// Builds the 7-DoF arm. At zero angles the arm hangs along -z from a
/// shoulder at the base origin; pitch joints turn about y, roll about x and
/// yaw about the link's long axis z.
pub fn open_arms_chain(profile: &Profile) -> Result<KinematicChain, ChainError> {
    let p = match profile {
        Profile::Default => ArmProfile::default(),
        Profile::Named(name) if name == "default" => ArmProfile::default(),
        Profile::Named(name) => return Err(ChainError::UnknownProfile(name.clone())),
        Profile::Custom(p) => p.clone(),
    };
    let down = |d: f64| Transform::translation(0.0, 0.0, -d);
    let layout = [
        (Vector3::y(), Transform::identity()),
        (Vector3::x(), Transform::identity()),
        (Vector3::z(), Transform::identity()),
        (Vector3::y(), down(p.upper_arm)),
        (Vector3::z(), down(0.5 * p.forearm)),
        (Vector3::x(), down(0.5 * p.forearm)),
        (Vector3::y(), Transform::identity()),
    ];
    let joints = OPEN_ARMS_JOINTS
        .iter()
        .zip(layout)
        .zip(p.limit_centers_deg)
        .map(|(((name, span), (axis, offset)), center)| {
            let lo = (center - 0.5 * span).to_radians();
            let hi = (center + 0.5 * span).to_radians();
            JointSpec::new(*name, axis, (lo, hi), offset)
        })
        .collect::<Result<Vec<_>, _>>()?;
    KinematicChain::new(Transform::identity(), joints, down(p.hand))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_profile_names_and_spans() {
        let chain = open_arms_chain(&Profile::Default).unwrap();
        let names: Vec<_> = chain.joints().iter().map(|j| j.name.as_str()).collect();
        assert_eq!(
            names,
            [
                "shoulder_pitch",
                "shoulder_roll",
                "shoulder_yaw",
                "elbow_pitch",
                "wrist_yaw",
                "wrist_roll",
                "wrist_pitch"
            ]
        );
        let span = |n: &str| chain.joints()[chain.joint_index(n).unwrap()].span();
        assert!((span("elbow_pitch") - 2.21657).abs() < 1e-5);
        assert!((span("wrist_roll") - 40f64.to_radians()).abs() < 1e-12);
        assert!((span("wrist_pitch") - 45f64.to_radians()).abs() < 1e-12);
        let sp = &chain.joints()[0];
        assert!((sp.limit_lo + 90f64.to_radians()).abs() < 1e-12);
        assert!((sp.limit_hi - 90f64.to_radians()).abs() < 1e-12);
    }

    #[test]
    fn named_profiles() {
        assert_eq!(
            open_arms_chain(&Profile::Named("default".into())).unwrap(),
            open_arms_chain(&Profile::Default).unwrap()
        );
        assert_eq!(
            open_arms_chain(&Profile::Named("tall".into())),
            Err(ChainError::UnknownProfile("tall".into()))
        );
    }

    #[test]
    fn custom_profile_moves_limits_and_links() {
        let mut p = ArmProfile::default();
        p.upper_arm = 0.3;
        p.limit_centers_deg[3] = 60.0;
        let chain = open_arms_chain(&Profile::Custom(p)).unwrap();
        let elbow = &chain.joints()[3];
        assert!((elbow.limit_lo - (60.0 - 63.5f64).to_radians()).abs() < 1e-12);
        assert!((elbow.offset.translation.vector.z + 0.3).abs() < 1e-15);
        let home = chain.forward_kinematics(&[0.0; 7]).unwrap();
        assert!((home.position.z + 0.65).abs() < 1e-12);
    }
}
