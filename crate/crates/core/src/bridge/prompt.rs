use crate::geometry::Camera;

/// Camera direction class used for prompt keywords.
///
/// Cameras above 30° elevation are `Top`. The rest are bucketed by azimuth
/// (0° looks from +z, 90° from +x): front [315, 45), left side [45, 135),
/// back [135, 225), right side [225, 315).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ViewBucket {
    Front,
    LeftSide,
    Back,
    RightSide,
    Top,
}

impl ViewBucket {
    pub fn keyword(self) -> &'static str {
        match self {
            ViewBucket::Front => "front view",
            ViewBucket::LeftSide => "left side view",
            ViewBucket::Back => "back view",
            ViewBucket::RightSide => "right side view",
            ViewBucket::Top => "top view",
        }
    }
}

pub const TOP_ELEVATION_DEG: f64 = 30.0;

pub fn view_bucket(camera: &Camera) -> ViewBucket {
    bucket_for(camera.azimuth_deg, camera.elevation_deg)
}

pub fn bucket_for(azimuth_deg: f64, elevation_deg: f64) -> ViewBucket {
    if elevation_deg > TOP_ELEVATION_DEG {
        return ViewBucket::Top;
    }
    let az = azimuth_deg.rem_euclid(360.0);
    if !(45.0..315.0).contains(&az) {
        ViewBucket::Front
    } else if az < 135.0 {
        ViewBucket::LeftSide
    } else if az < 225.0 {
        ViewBucket::Back
    } else {
        ViewBucket::RightSide
    }
}

/// `base` with the camera's direction keyword appended as `", <keyword>"`.
pub fn directional_prompt(base: &str, camera: &Camera) -> String {
    format!("{base}, {}", view_bucket(camera).keyword())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn buckets() {
        assert_eq!(bucket_for(0.0, 0.0), ViewBucket::Front);
        assert_eq!(bucket_for(180.0, 0.0), ViewBucket::Back);
        assert_eq!(bucket_for(90.0, 0.0), ViewBucket::LeftSide);
        assert_eq!(bucket_for(270.0, 0.0), ViewBucket::RightSide);
        assert_eq!(bucket_for(0.0, 45.0), ViewBucket::Top);
        assert_eq!(bucket_for(-30.0, 0.0), ViewBucket::Front);
        assert_eq!(bucket_for(45.0, 30.0), ViewBucket::LeftSide);
        assert_eq!(bucket_for(315.0, 0.0), ViewBucket::Front);
        assert_eq!(bucket_for(314.999, 0.0), ViewBucket::RightSide);
    }
}
