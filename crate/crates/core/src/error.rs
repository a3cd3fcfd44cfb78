use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("bad image data: {0}")]
    BadImage(String),

    #[error("structuring kernel dimensions must be odd and nonzero, got {width}x{height}")]
    BadKernel { width: u32, height: u32 },

    #[error("merge config invalid: {0}")]
    BadMergeConfig(String),

    #[error("indentation threshold {indent_px}px is not below the box width {box_width}px")]
    IndentTooWide { indent_px: u32, box_width: u32 },

    #[error("k-means needs at least k={k} distinct points, got {distinct}")]
    TooFewPoints { k: usize, distinct: usize },

    #[error("glyph {0:?} is not in the embedded font")]
    UnsupportedGlyph(char),

    #[error("OCR backend unavailable: {0}")]
    OcrUnavailable(String),

    #[error("OCR failed on block: {0}")]
    OcrBlock(String),

    #[error("recognition box {left},{top}..{right},{bottom} exceeds image {width}x{height}")]
    BoxOutOfBounds {
        left: u32,
        top: u32,
        right: u32,
        bottom: u32,
        width: u32,
        height: u32,
    },

    #[error("bad record grammar: {0}")]
    BadGrammar(String),

    #[error("bad gazetteer: {0}")]
    BadGazetteer(String),

    #[error("geocoder backend error: {0}")]
    Geocode(String),

    #[error("bad profile: {0}")]
    BadProfile(String),

    #[error("no estimate for year {0}")]
    MissingEstimate(u16),

    #[error("malformed estimate file row: {0:?}")]
    BadEstimateFile(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
