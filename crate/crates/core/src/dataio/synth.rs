use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::image_io::{save_image, save_mask};
use super::manifest::{DatasetManifest, MANIFEST_FILE};
use crate::attrclass::AttributeScheme;
use crate::error::{Error, Result};
use crate::faceseg::{LabelMask, BACK, BROWS, CLASS_COUNT, EYES, HAIR, MOUTH, NOSE, PALETTE, SKIN};
use crate::rng::{derive_seed, SeededRng};
use crate::tensor::Tensor;

/// Closed interval sampled uniformly; written as `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Range(pub f64, pub f64);

impl Range {
    fn draw(self, rng: &mut SeededRng) -> f64 {
        if self.1 > self.0 {
            rng.uniform(self.0, self.1)
        } else {
            self.0
        }
    }

    fn valid(self) -> bool {
        self.0.is_finite() && self.1.is_finite() && self.0 <= self.1
    }
}

/// Minor-class geometry of one style family, in units of the image side.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StyleFamily {
    pub name: String,
    /// Eye ellipse semi-axes (horizontal, vertical).
    pub eye_axes: [Range; 2],
    /// Horizontal offset of each eye from the face's vertical axis.
    pub eye_offset: Range,
    pub eye_height: Range,
    pub brow_axes: [Range; 2],
    /// Distance from eye center up to brow center.
    pub brow_gap: Range,
    pub nose_axes: [Range; 2],
    pub nose_height: Range,
    pub mouth_axes: [Range; 2],
    pub mouth_height: Range,
}

/// Procedural face generator settings. All geometry is relative to the
/// image side; colors are RGB in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub size: usize,
    pub seed: u64,
    pub noise: f64,
    pub face_center_y: Range,
    pub face_axes: [Range; 2],
    /// How far the hair ellipse extends past the face ellipse.
    pub hair_margin: [Range; 2],
    pub background_level: Range,
    pub skin_tone: Range,
    pub hair_tone: Range,
    pub families: Vec<StyleFamily>,
}

fn fam(
    name: &str,
    eye: [(f64, f64); 2],
    mouth: [(f64, f64); 2],
) -> StyleFamily {
    StyleFamily {
        name: name.into(),
        eye_axes: [Range(eye[0].0, eye[0].1), Range(eye[1].0, eye[1].1)],
        eye_offset: Range(0.14, 0.16),
        eye_height: Range(0.44, 0.46),
        brow_axes: [Range(0.08, 0.09), Range(0.03, 0.035)],
        brow_gap: Range(0.105, 0.115),
        nose_axes: [Range(0.045, 0.055), Range(0.075, 0.085)],
        nose_height: Range(0.59, 0.61),
        mouth_axes: [Range(mouth[0].0, mouth[0].1), Range(mouth[1].0, mouth[1].1)],
        mouth_height: Range(0.76, 0.78),
    }
}

impl Default for SynthConfig {
    /// Two families trading eye area for mouth area, so skin and
    /// background coverage match between them.
    fn default() -> Self {
        Self {
            size: 32,
            seed: 0,
            noise: 0.02,
            face_center_y: Range(0.55, 0.58),
            face_axes: [Range(0.33, 0.36), Range(0.38, 0.41)],
            hair_margin: [Range(0.05, 0.07), Range(0.06, 0.08)],
            background_level: Range(0.15, 0.45),
            skin_tone: Range(0.7, 1.05),
            hair_tone: Range(0.6, 1.2),
            families: vec![
                fam("wide_eyes", [(0.085, 0.095), (0.055, 0.065)], [(0.09, 0.10), (0.035, 0.045)]),
                fam("wide_mouth", [(0.065, 0.075), (0.04, 0.05)], [(0.15, 0.16), (0.05, 0.06)]),
            ],
        }
    }
}

/// Smallest semi-axis, in pixels, that guarantees an ellipse covers a pixel center.
const MIN_AXIS_PX: f64 = 0.75;

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.size < 8 {
            return Err(Error::Config(format!("synthetic image size {} is below 8", self.size)));
        }
        if self.families.len() < 2 {
            return Err(Error::Config("at least two style families are needed".into()));
        }
        if !(self.noise >= 0.0) {
            return Err(Error::Config(format!("noise {} must be non-negative", self.noise)));
        }
        let shared = [
            ("face_center_y", self.face_center_y),
            ("face_axes[0]", self.face_axes[0]),
            ("face_axes[1]", self.face_axes[1]),
            ("hair_margin[0]", self.hair_margin[0]),
            ("hair_margin[1]", self.hair_margin[1]),
            ("background_level", self.background_level),
            ("skin_tone", self.skin_tone),
            ("hair_tone", self.hair_tone),
        ];
        for (name, r) in shared {
            if !r.valid() || r.0 < 0.0 {
                return Err(Error::Config(format!("range {name} = [{}, {}] is invalid", r.0, r.1)));
            }
        }
        let px = self.size as f64;
        for f in &self.families {
            let axes = [
                ("eye_axes", f.eye_axes),
                ("brow_axes", f.brow_axes),
                ("nose_axes", f.nose_axes),
                ("mouth_axes", f.mouth_axes),
            ];
            for (name, pair) in axes {
                for r in pair {
                    if !r.valid() || r.0 * px < MIN_AXIS_PX {
                        return Err(Error::Config(format!(
                            "family `{}`: {name} range [{}, {}] is under {MIN_AXIS_PX} px at size {} and the class could vanish",
                            f.name, r.0, r.1, self.size
                        )));
                    }
                }
            }
            for (name, r) in [
                ("eye_offset", f.eye_offset),
                ("eye_height", f.eye_height),
                ("brow_gap", f.brow_gap),
                ("nose_height", f.nose_height),
                ("mouth_height", f.mouth_height),
            ] {
                if !r.valid() {
                    return Err(Error::Config(format!("family `{}`: range {name} is invalid", f.name)));
                }
            }
        }
        Ok(())
    }

    pub fn scheme(&self) -> AttributeScheme {
        AttributeScheme {
            name: "style".into(),
            labels: self.families.iter().map(|f| f.name.clone()).collect(),
        }
    }
}

#[derive(Clone, Copy)]
struct Ellipse {
    cx: f64,
    cy: f64,
    ax: f64,
    ay: f64,
}

impl Ellipse {
    fn contains(&self, x: f64, y: f64) -> bool {
        let dx = (x - self.cx) / self.ax;
        let dy = (y - self.cy) / self.ay;
        dx * dx + dy * dy <= 1.0
    }
}

#[derive(Clone, Debug)]
pub struct SynthFace {
    pub id: String,
    pub image: Tensor<f64>,
    pub mask: LabelMask,
    pub family: usize,
}

/// Draws face `index`; its random stream depends only on the config seed
/// and the index.
pub fn generate_face(config: &SynthConfig, index: usize) -> Result<SynthFace> {
    let family = index % config.families.len();
    let f = &config.families[family];
    let mut rng = SeededRng::new(derive_seed(config.seed, index as u64));
    let s = config.size;

    let face_cy = config.face_center_y.draw(&mut rng);
    let face = Ellipse {
        cx: 0.5,
        cy: face_cy,
        ax: config.face_axes[0].draw(&mut rng),
        ay: config.face_axes[1].draw(&mut rng),
    };
    let hair = Ellipse {
        cx: 0.5,
        cy: face_cy - 0.05,
        ax: face.ax + config.hair_margin[0].draw(&mut rng),
        ay: face.ay + config.hair_margin[1].draw(&mut rng),
    };
    let eye_dx = f.eye_offset.draw(&mut rng);
    let eye_y = f.eye_height.draw(&mut rng);
    let (eax, eay) = (f.eye_axes[0].draw(&mut rng), f.eye_axes[1].draw(&mut rng));
    let brow_y = eye_y - f.brow_gap.draw(&mut rng);
    let (bax, bay) = (f.brow_axes[0].draw(&mut rng), f.brow_axes[1].draw(&mut rng));
    let nose = Ellipse {
        cx: 0.5,
        cy: f.nose_height.draw(&mut rng),
        ax: f.nose_axes[0].draw(&mut rng),
        ay: f.nose_axes[1].draw(&mut rng),
    };
    let mouth = Ellipse {
        cx: 0.5,
        cy: f.mouth_height.draw(&mut rng),
        ax: f.mouth_axes[0].draw(&mut rng),
        ay: f.mouth_axes[1].draw(&mut rng),
    };
    let eyes = [-1.0, 1.0].map(|side| Ellipse {
        cx: 0.5 + side * eye_dx,
        cy: eye_y,
        ax: eax,
        ay: eay,
    });
    let brows = [-1.0, 1.0].map(|side| Ellipse {
        cx: 0.5 + side * eye_dx,
        cy: brow_y,
        ax: bax,
        ay: bay,
    });

    let bg = config.background_level.draw(&mut rng);
    let tone = config.skin_tone.draw(&mut rng);
    let hair_tone = config.hair_tone.draw(&mut rng);
    let skin = [0.87 * tone, 0.67 * tone, 0.53 * tone];
    let colors: [[f64; 3]; CLASS_COUNT] = [
        [bg * 0.9, bg, bg * 1.15],
        skin,
        [0.40 * hair_tone, 0.25 * hair_tone, 0.12 * hair_tone],
        [0.15, 0.22, 0.40],
        [0.08, 0.06, 0.05],
        [skin[0] * 0.8, skin[1] * 0.75, skin[2] * 0.75],
        [0.75, 0.18, 0.22],
    ];

    let mut labels = vec![BACK; s * s];
    for y in 0..s {
        for x in 0..s {
            let (u, v) = ((x as f64 + 0.5) / s as f64, (y as f64 + 0.5) / s as f64);
            let mut class = BACK;
            if hair.contains(u, v) && v < face.cy {
                class = HAIR;
            }
            if face.contains(u, v) {
                class = SKIN;
                if nose.contains(u, v) {
                    class = NOSE;
                }
                if eyes.iter().any(|e| e.contains(u, v)) {
                    class = EYES;
                }
                if brows.iter().any(|e| e.contains(u, v)) {
                    class = BROWS;
                }
                if mouth.contains(u, v) {
                    class = MOUTH;
                }
            }
            labels[y * s + x] = class;
        }
    }
    let mask = LabelMask::new(s, s, labels)?;
    let counts = mask.class_counts();
    if let Some(missing) = (0..CLASS_COUNT).find(|&c| counts[c] == 0) {
        return Err(Error::Config(format!(
            "face {index} has no `{}` pixels; the configured geometry lets the class vanish",
            PALETTE[missing].name
        )));
    }

    let n = s * s;
    let mut data = vec![0.0; 3 * n];
    for (p, &class) in mask.data().iter().enumerate() {
        for c in 0..3 {
            let noise = config.noise * rng.normal();
            data[c * n + p] = (colors[class as usize][c] + noise).clamp(0.0, 1.0);
        }
    }
    Ok(SynthFace {
        id: format!("face_{index:04}"),
        image: Tensor::new(&[3, s, s], data)?,
        mask,
        family,
    })
}

/// `n` faces; family `i % families` for face `i`.
pub fn generate_synthetic(config: &SynthConfig, n: usize) -> Result<Vec<SynthFace>> {
    config.validate()?;
    if n == 0 {
        return Err(Error::InvalidArgument("cannot generate zero faces".into()));
    }
    (0..n).map(|i| generate_face(config, i)).collect()
}

/// Writes images, masks and a manifest under `dir`.
pub fn write_synthetic(config: &SynthConfig, faces: &[SynthFace], dir: &Path) -> Result<DatasetManifest> {
    for sub in ["images", "masks"] {
        let d = dir.join(sub);
        fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    let scheme = config.scheme();
    let mut manifest = DatasetManifest::new(dir, Some(scheme.clone()));
    for face in faces {
        let image = Path::new("images").join(format!("{}.png", face.id));
        let mask = Path::new("masks").join(format!("{}.png", face.id));
        save_image(&dir.join(&image), &face.image)?;
        save_mask(&dir.join(&mask), &face.mask)?;
        manifest.add(&face.id, &image, Some(&mask), Some(&scheme.labels[face.family]))?;
    }
    manifest.save(&dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}
