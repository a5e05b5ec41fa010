use crate::lattice::ModeIndex;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("initial mode set is empty")]
    EmptyModeSet,

    #[error("mode {mode} is not an extremal mode of generation {generation}")]
    NotExtremal { mode: ModeIndex, generation: u32 },

    #[error("mode {mode} lies outside the truncation box of radius {radius}")]
    OutsideTruncation { mode: ModeIndex, radius: i64 },

    #[error("truncation leak: mode {mode} outside the box is forced with magnitude {forcing:e}")]
    TruncationLeak { mode: ModeIndex, forcing: f64 },

    #[error("divergence guard: l1 norm {norm:e} exceeds {limit:e} at slow time {time}")]
    Divergence { norm: f64, limit: f64, time: f64 },

    #[error("non-finite value in the split-step solver at t = {time} (step {step})")]
    BlowUp { time: f64, step: u64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("time {time} outside the trajectory range [{start}, {end}]")]
    OutOfRange { time: f64, start: f64, end: f64 },

    #[error("mode {mode} has |j|^2 = {norm_sq} < 2 and therefore no layer time")]
    NoLayerTime { mode: ModeIndex, norm_sq: i64 },

    #[error("series for mode {mode} ends at t = {end} but t = {required} is required")]
    SeriesTooShort { mode: ModeIndex, end: f64, required: f64 },

    #[error("mode {0} is not present in the series")]
    MissingMode(ModeIndex),

    #[error("theta = {0} violates the localization hypothesis theta < 1/4")]
    ThetaOutOfRange(f64),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
