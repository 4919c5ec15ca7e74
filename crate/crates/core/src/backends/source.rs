use std::sync::Arc;

use super::{BackendError, ChatBackend, EmbedBackend, EmbeddingTable, ScriptedChat, ScriptedEmbedder, ScriptedFixture};

/// Hands out chat backends. Scripted sources build a fresh backend on every
/// call so that independent runs never share rule-cycling state; shared
/// sources return the same handle.
#[derive(Clone)]
pub enum ChatSource {
    Scripted(ScriptedFixture),
    Shared(Arc<dyn ChatBackend>),
}

impl ChatSource {
    pub fn instance(&self) -> Arc<dyn ChatBackend> {
        match self {
            ChatSource::Scripted(f) => Arc::new(ScriptedChat::new(f.clone())),
            ChatSource::Shared(c) => c.clone(),
        }
    }
}

#[derive(Clone)]
pub enum EmbedSource {
    Scripted(EmbeddingTable),
    Shared(Arc<dyn EmbedBackend>),
}

impl EmbedSource {
    pub fn instance(&self) -> Result<Arc<dyn EmbedBackend>, BackendError> {
        Ok(match self {
            EmbedSource::Scripted(t) => Arc::new(ScriptedEmbedder::new(t.clone())?),
            EmbedSource::Shared(e) => e.clone(),
        })
    }
}
