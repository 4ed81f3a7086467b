use serde::Serialize;

pub const CLASS_COUNT: usize = 7;

pub const BACK: u8 = 0;
pub const SKIN: u8 = 1;
pub const HAIR: u8 = 2;
pub const EYES: u8 = 3;
pub const BROWS: u8 = 4;
pub const NOSE: u8 = 5;
pub const MOUTH: u8 = 6;

/// One palette entry as served to annotation clients.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ClassEntry {
    pub index: u8,
    pub name: &'static str,
    pub color: [u8; 3],
}

/// The frozen class table. Mask files store these indices directly.
pub const PALETTE: [ClassEntry; CLASS_COUNT] = [
    ClassEntry { index: BACK, name: "back", color: [0, 0, 0] },
    ClassEntry { index: SKIN, name: "skin", color: [230, 180, 140] },
    ClassEntry { index: HAIR, name: "hair", color: [120, 70, 20] },
    ClassEntry { index: EYES, name: "eyes", color: [40, 120, 255] },
    ClassEntry { index: BROWS, name: "brows", color: [255, 220, 0] },
    ClassEntry { index: NOSE, name: "nose", color: [0, 200, 80] },
    ClassEntry { index: MOUTH, name: "mouth", color: [220, 20, 60] },
];

/// Planes kept for the attribute feature vector, in stacking order.
pub const FEATURE_CLASSES: [u8; 5] = [HAIR, EYES, BROWS, NOSE, MOUTH];

pub fn class_name(index: u8) -> Option<&'static str> {
    PALETTE.get(index as usize).map(|e| e.name)
}

pub fn class_index(name: &str) -> Option<u8> {
    PALETTE.iter().find(|e| e.name == name).map(|e| e.index)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indices_are_dense() {
        for (i, e) in PALETTE.iter().enumerate() {
            assert_eq!(e.index as usize, i);
            assert_eq!(class_index(e.name), Some(e.index));
        }
        assert_eq!(class_name(7), None);
    }
}
