from .base import (AuthenticationError, Backend, BackendResponse, DecodingParams,
                   GenerationRequest, RequestKind, TransportError, estimate_tokens)
from .http import HttpBackend, HttpBackendConfig
from .scripted import ScriptedBackend, ScriptExhausted
from .sim import SimBackend, SimWorld, SimWorldConfig, parse_context_steps
from .transcript import (ReplayMismatch, TranscriptRecorder, TranscriptReplayBackend,
                         load_transcript)

__all__ = [
    "AuthenticationError", "Backend", "BackendResponse", "DecodingParams",
    "GenerationRequest", "RequestKind", "TransportError", "estimate_tokens",
    "HttpBackend", "HttpBackendConfig", "ScriptedBackend", "ScriptExhausted",
    "SimBackend", "SimWorld", "SimWorldConfig", "parse_context_steps",
    "ReplayMismatch", "TranscriptRecorder", "TranscriptReplayBackend", "load_transcript",
]
