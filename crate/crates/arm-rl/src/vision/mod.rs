//! Target detection from rendered camera frames.
//!
//! The pipeline is deliberately classical: per-channel intensity thresholds
//! combine into a colour mask that isolates the red target, and a Hough vote
//! over the mask boundary recovers its centre and radius. Rewards downstream
//! depend only on the resulting [`Detection`].

mod hough;
mod image;

pub use hough::{
    hough_circles, Detection, HoughConfig, MAX_TARGET_RADIUS, MIN_TARGET_RADIUS,
};
pub use image::{BinaryMask, Image, Rgb, FRAME_CENTER, FRAME_HEIGHT, FRAME_WIDTH};

/// One of the three colour planes of an [`Image`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Red,
    Green,
    Blue,
}

impl Channel {
    pub(crate) fn index(self) -> usize {
        match self {
            Channel::Red => 0,
            Channel::Green => 1,
            Channel::Blue => 2,
        }
    }
}

/// Per-channel intensity cutoffs for the colour mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChannelCutoffs {
    pub red: u8,
    pub green: u8,
    pub blue: u8,
}

/// The stock cutoffs: bright in red, dark in green and blue.
pub fn default_cutoffs() -> ChannelCutoffs {
    ChannelCutoffs {
        red: 200,
        green: 200,
        blue: 200,
    }
}

/// Pixels whose `channel` value is at least `cutoff`.
pub fn threshold_channel(img: &Image, channel: Channel, cutoff: u8) -> BinaryMask {
    let mut mask = BinaryMask::new(img.width(), img.height());
    let idx = channel.index();
    for y in 0..img.height() {
        for x in 0..img.width() {
            mask.set(x, y, img.get(x, y)[idx] >= cutoff);
        }
    }
    mask
}

/// Pixels that pass the red threshold and fail both the green and blue
/// thresholds — i.e. saturated red, not white or grey.
pub fn isolate_target(img: &Image, cutoffs: &ChannelCutoffs) -> BinaryMask {
    let mut mask = BinaryMask::new(img.width(), img.height());
    for y in 0..img.height() {
        for x in 0..img.width() {
            let [r, g, b] = img.get(x, y);
            mask.set(
                x,
                y,
                r >= cutoffs.red && g < cutoffs.green && b < cutoffs.blue,
            );
        }
    }
    mask
}

/// Full detection pass: isolate the target colour, vote for circles, return
/// the highest-vote detection if any.
pub fn detect_target(
    img: &Image,
    cutoffs: &ChannelCutoffs,
    cfg: &HoughConfig,
) -> Option<Detection> {
    let mask = isolate_target(img, cutoffs);
    hough_circles(&mask, cfg, MIN_TARGET_RADIUS, MAX_TARGET_RADIUS)
        .into_iter()
        .next()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn threshold_is_inclusive_at_the_cutoff() {
        let mut img = Image::new(3, 1);
        img.set(0, 0, [199, 0, 0]);
        img.set(1, 0, [200, 0, 0]);
        img.set(2, 0, [201, 0, 0]);
        let mask = threshold_channel(&img, Channel::Red, 200);
        assert!(!mask.get(0, 0));
        assert!(mask.get(1, 0));
        assert!(mask.get(2, 0));
    }

    #[test]
    fn isolate_keeps_red_and_rejects_white_and_black() {
        let mut img = Image::new(4, 1);
        img.set(0, 0, [255, 0, 0]); // saturated red: kept
        img.set(1, 0, [255, 255, 255]); // white: bright everywhere, rejected
        img.set(2, 0, [0, 0, 0]); // black: fails the red cutoff
        img.set(3, 0, [204, 80, 2]); // dimmed red: still kept
        let mask = isolate_target(&img, &default_cutoffs());
        assert!(mask.get(0, 0));
        assert!(!mask.get(1, 0));
        assert!(!mask.get(2, 0));
        assert!(mask.get(3, 0));
    }

    #[test]
    fn detect_target_finds_the_drawn_disc() {
        let mut img = Image::filled(FRAME_WIDTH, FRAME_HEIGHT, [255, 255, 255]);
        img.draw_disc(200.0, 150.0, 25.0, [255, 0, 0]);
        let det = detect_target(&img, &default_cutoffs(), &HoughConfig::default())
            .expect("disc should be detected");
        assert!(det.distance_to((200.0, 150.0)) <= 3.0);
        assert!((det.radius - 25.0).abs() <= 2.0);
    }

    #[test]
    fn detect_target_on_blank_frame_is_none() {
        let img = Image::filled(FRAME_WIDTH, FRAME_HEIGHT, [255, 255, 255]);
        assert!(detect_target(&img, &default_cutoffs(), &HoughConfig::default()).is_none());
    }

    proptest! {
        /// Raising a cutoff can only shrink the mask.
        #[test]
        fn threshold_is_monotone_in_the_cutoff(
            pixels in prop::collection::vec(0u8..=255, 64),
            lo in 0u8..=254,
        ) {
            let hi = lo + 1;
            let mut img = Image::new(8, 8);
            for (i, &v) in pixels.iter().enumerate() {
                img.set(i % 8, i / 8, [v, 0, 0]);
            }
            let loose = threshold_channel(&img, Channel::Red, lo);
            let tight = threshold_channel(&img, Channel::Red, hi);
            prop_assert!(tight.is_subset_of(&loose));
        }

        /// The isolated mask never contains a pixel the red threshold rejects.
        #[test]
        fn isolate_is_subset_of_red_threshold(
            pixels in prop::collection::vec((0u8..=255, 0u8..=255, 0u8..=255), 64),
        ) {
            let mut img = Image::new(8, 8);
            for (i, &(r, g, b)) in pixels.iter().enumerate() {
                img.set(i % 8, i / 8, [r, g, b]);
            }
            let cutoffs = default_cutoffs();
            let red = threshold_channel(&img, Channel::Red, cutoffs.red);
            let isolated = isolate_target(&img, &cutoffs);
            prop_assert!(isolated.is_subset_of(&red));
        }
    }
}
