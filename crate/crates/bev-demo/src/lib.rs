//! Browser demo for the tracker: a wasm module that runs seeded scenarios
//! entirely client-side and hands the page JSON scenes to draw.
//!
//! The demo logic lives in [`app`] as ordinary Rust so it compiles and
//! tests on the host; the thin bindings below exist only on wasm32. Build
//! the browser artifact with
//! `wasm-pack build crates/bev-demo --target web --out-dir www/pkg`
//! and serve the crate's `www/` directory.

pub mod app;

#[cfg(target_arch = "wasm32")]
mod bindings {
    use crate::app;
    use wasm_bindgen::prelude::*;

    fn to_json<T: serde::Serialize>(value: &T) -> Result<String, JsError> {
        serde_json::to_string(value).map_err(|e| JsError::new(&e.to_string()))
    }

    /// Full playback of a seeded run as a JSON array of frames.
    #[wasm_bindgen]
    pub fn run_scenario(seed: u32, p_d: f64, clutter_rate: f64) -> Result<String, JsError> {
        let frames =
            app::run_scenario(seed as u64, p_d, clutter_rate).map_err(|e| JsError::new(&e))?;
        to_json(&frames)
    }

    /// MOTA for each miss-tolerance limit, as JSON `[[limit, mota], ..]`.
    #[wasm_bindgen]
    pub fn sweep_miss_limit(
        seed: u32,
        p_d: f64,
        clutter_rate: f64,
        limits: Vec<u32>,
    ) -> Result<String, JsError> {
        let rows = app::sweep_miss_limit(seed as u64, p_d, clutter_rate, &limits)
            .map_err(|e| JsError::new(&e))?;
        to_json(&rows)
    }

    /// A scenario the page steps one frame at a time.
    #[wasm_bindgen]
    pub struct Session {
        inner: app::StepSession,
    }

    #[wasm_bindgen]
    impl Session {
        #[wasm_bindgen(constructor)]
        pub fn new(seed: u32, p_d: f64, clutter_rate: f64) -> Result<Session, JsError> {
            let inner = app::StepSession::new(seed as u64, p_d, clutter_rate)
                .map_err(|e| JsError::new(&e))?;
            Ok(Session { inner })
        }

        /// Drawing bounds and frame count as JSON.
        pub fn info(&self) -> Result<String, JsError> {
            to_json(&self.inner.info())
        }

        /// The next frame as JSON, or `null` once exhausted.
        pub fn step(&mut self) -> Result<Option<String>, JsError> {
            match self.inner.step().map_err(|e| JsError::new(&e))? {
                Some(frame) => Ok(Some(to_json(&frame)?)),
                None => Ok(None),
            }
        }
    }
}
