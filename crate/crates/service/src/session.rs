//! Session state and the in-memory store.
//!
//! Each session's state sits behind a readers-writer lock: renders hold a
//! read lock for their whole computation and parameter changes take the
//! write lock, so a render never mixes two parameter states.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use attnshift_core::imaging::{EditRecipe, MaskLayer, RasterImage, TraceEntry};
use attnshift_toolkit::io::{load_image, load_mask, save_image};
use attnshift_toolkit::recipe::{parse_recipe, recipe_to_json};
use parking_lot::{Mutex, RwLock};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "state", content = "message", rename_all = "lowercase")]
pub enum JobStatus {
    Idle,
    Running,
    Done,
    Failed(String),
}

/// Preview cache key: alpha bits, preview size and recipe hash.
pub type PreviewKey = (u64, usize, String);

pub struct SessionState {
    pub image: Arc<RasterImage>,
    pub mask: Arc<MaskLayer>,
    pub recipe: Option<EditRecipe>,
    /// All styles of the last optimization, best first.
    pub styles: Vec<EditRecipe>,
    pub trace: Option<Vec<TraceEntry>>,
    pub job: JobStatus,
    /// Image and mask downscaled per preview size.
    pub scaled: Mutex<HashMap<usize, Arc<(RasterImage, MaskLayer)>>>,
    pub previews: Mutex<HashMap<PreviewKey, Arc<Vec<u8>>>>,
}

impl SessionState {
    pub fn new(image: RasterImage, mask: MaskLayer) -> Self {
        SessionState {
            image: Arc::new(image),
            mask: Arc::new(mask),
            recipe: None,
            styles: Vec::new(),
            trace: None,
            job: JobStatus::Idle,
            scaled: Mutex::new(HashMap::new()),
            previews: Mutex::new(HashMap::new()),
        }
    }

    /// Replaces the recipe and drops every cached preview.
    pub fn set_recipe(&mut self, recipe: EditRecipe) {
        self.recipe = Some(recipe);
        self.previews.get_mut().clear();
    }

    pub fn recipe_or_identity(&self) -> EditRecipe {
        self.recipe.clone().unwrap_or_else(|| EditRecipe::identity(8))
    }

    pub fn scaled(&self, max_dim: usize) -> Arc<(RasterImage, MaskLayer)> {
        let mut scaled = self.scaled.lock();
        scaled
            .entry(max_dim)
            .or_insert_with(|| Arc::new(attnshift_toolkit::downscale(&self.image, &self.mask, max_dim)))
            .clone()
    }
}

pub struct Session {
    pub id: String,
    pub state: RwLock<SessionState>,
    last_access: Mutex<Instant>,
}

impl Session {
    fn new(id: String, state: SessionState) -> Self {
        Session {
            id,
            state: RwLock::new(state),
            last_access: Mutex::new(Instant::now()),
        }
    }

    pub fn touch(&self) {
        *self.last_access.lock() = Instant::now();
    }

    pub fn idle_for(&self, now: Instant) -> Duration {
        now.saturating_duration_since(*self.last_access.lock())
    }
}

#[derive(Default)]
pub struct SessionStore {
    sessions: RwLock<HashMap<String, Arc<Session>>>,
    persist_dir: Option<PathBuf>,
}

impl SessionStore {
    pub fn new(persist_dir: Option<PathBuf>) -> Self {
        let store = SessionStore {
            sessions: RwLock::new(HashMap::new()),
            persist_dir,
        };
        store.restore();
        store
    }

    pub fn create(&self, image: RasterImage, mask: MaskLayer) -> Arc<Session> {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let session = Arc::new(Session::new(id.clone(), SessionState::new(image, mask)));
        self.persist(&session);
        self.sessions.write().insert(id, session.clone());
        session
    }

    pub fn get(&self, id: &str) -> Option<Arc<Session>> {
        let s = self.sessions.read().get(id).cloned();
        if let Some(s) = &s {
            s.touch();
        }
        s
    }

    pub fn remove(&self, id: &str) -> bool {
        let removed = self.sessions.write().remove(id).is_some();
        if removed {
            if let Some(dir) = &self.persist_dir {
                let _ = fs::remove_dir_all(dir.join(id));
            }
        }
        removed
    }

    pub fn len(&self) -> usize {
        self.sessions.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Drops sessions idle longer than `ttl`, except ones with a running job.
    /// Returns how many were dropped.
    pub fn evict_idle(&self, ttl: Duration, now: Instant) -> usize {
        let expired: Vec<String> = self
            .sessions
            .read()
            .values()
            .filter(|s| s.idle_for(now) > ttl && s.state.read().job != JobStatus::Running)
            .map(|s| s.id.clone())
            .collect();
        for id in &expired {
            self.remove(id);
        }
        expired.len()
    }

    /// Mirrors image, mask and recipe to the persistence directory. Failures
    /// are logged, not fatal.
    pub fn persist(&self, session: &Session) {
        let Some(dir) = &self.persist_dir else { return };
        let path = dir.join(&session.id);
        let state = session.state.read();
        if let Err(e) = write_session(&path, &state) {
            log::warn!("persisting session {}: {e}", session.id);
        }
    }

    fn restore(&self) {
        let Some(dir) = &self.persist_dir else { return };
        let Ok(entries) = fs::read_dir(dir) else { return };
        for entry in entries.flatten() {
            let path = entry.path();
            let Some(id) = path.file_name().and_then(|n| n.to_str()).map(str::to_string) else {
                continue;
            };
            match read_session(&path) {
                Ok(state) => {
                    self.sessions.write().insert(id.clone(), Arc::new(Session::new(id, state)));
                }
                Err(e) => log::warn!("skipping persisted session {}: {e}", path.display()),
            }
        }
    }
}

fn write_session(path: &Path, state: &SessionState) -> Result<(), String> {
    fs::create_dir_all(path).map_err(|e| e.to_string())?;
    let image = path.join("image.png");
    if !image.exists() {
        save_image(&state.image, &image).map_err(|e| e.to_string())?;
        let m = &state.mask;
        let gray = RasterImage::from_planar(m.width(), m.height(), m.weights().repeat(3))
            .map_err(|e| e.to_string())?;
        save_image(&gray, path.join("mask.png")).map_err(|e| e.to_string())?;
    }
    if let Some(r) = &state.recipe {
        fs::write(path.join("recipe.json"), recipe_to_json(r)).map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn read_session(path: &Path) -> Result<SessionState, String> {
    let image = load_image(path.join("image.png")).map_err(|e| e.to_string())?;
    let mask = load_mask(path.join("mask.png")).map_err(|e| e.to_string())?;
    let mut state = SessionState::new(image, mask);
    let recipe_path = path.join("recipe.json");
    if recipe_path.exists() {
        let json = fs::read_to_string(&recipe_path).map_err(|e| e.to_string())?;
        state.recipe = Some(parse_recipe(&json).map_err(|e| e.to_string())?);
        state.job = JobStatus::Done;
    }
    Ok(state)
}
