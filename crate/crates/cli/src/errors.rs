use std::fmt;

/// Marks a failure caused by the user's input rather than by processing.
#[derive(Debug)]
pub struct InputError(anyhow::Error);

impl InputError {
    pub fn msg(msg: impl fmt::Display) -> Self {
        InputError(anyhow::anyhow!("{msg}"))
    }
}

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.0)
    }
}

impl std::error::Error for InputError {}

pub trait InputContext<T> {
    /// Classifies any error from this result as an input error.
    fn input(self) -> anyhow::Result<T>;
}

impl<T, E: Into<anyhow::Error>> InputContext<T> for Result<T, E> {
    fn input(self) -> anyhow::Result<T> {
        self.map_err(|e| InputError(e.into()).into())
    }
}

/// 2 for input and validation failures, 3 for internal invariant failures.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<InputError>().is_some() {
        return 2;
    }
    let internal = err
        .chain()
        .filter_map(|e| e.downcast_ref::<tempalign::Error>())
        .any(tempalign::Error::is_internal);
    if internal {
        3
    } else {
        2
    }
}
