"""Natural-language driving descriptions from normalized feature vectors.

Two interchangeable describers share one contract: a remote chat-completion
client and a deterministic offline fallback.  Both consume z-score
normalized feature vectors (the prompt exemplar shows normalized values,
including negatives for nonnegative raw features) and both are cached by a
key over the exact feature bytes and the describer identity.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from ._http import post_with_retries, require_api_key
from .cache import CacheRecord, TextCache, text_key
from .errors import MalformedResponseError
from .features import FeatureVector

FALLBACK_MODEL_ID = "offline-describer-v1"

PROMPT_INSTRUCTION = (
    "Please analyze the driving style based on the following feature values "
    "and describe it in natural language within 100 words."
)

# One-shot exemplar: a normalized feature block for a fast, event-heavy
# segment, and the reference description of it.
EXAMPLE_FEATURE_BLOCK = """\
speed_mean: 1.203417825
acceleration_mean: 0.815230147
jerk_mean: 0.127445903
acceleration_change_rate: -0.540905602
num_hard_accelerations: 1.337209481
num_hard_brakes: 1.102587343
speed_change_rate: 0.961352184
speed_acceleration_cross_correlation: 0.215487069
acceleration_autocorrelation: 0.498655829"""

EXAMPLE_RESPONSE = (
    "The elevated mean speed and frequent hard acceleration and braking "
    "events, combined with a high speed change rate, suggest an aggressive "
    "driving style. The driver accelerates sharply, maintains high speeds, "
    "and brakes late, showing little smoothing of speed transitions. The "
    "positive acceleration autocorrelation indicates sustained bursts of "
    "throttle rather than isolated corrections. Overall, this segment "
    "reflects a driver who prioritizes pace over smoothness and comfort."
)


@dataclass
class LlmConfig:
    """Remote describer settings.  ``endpoint`` of None selects the offline
    fallback.  The API credential is read from the environment variable
    named by ``api_key_env`` and is never stored or written to disk."""

    endpoint: str | None = None
    model_id: str = "gpt-4o"
    api_key_env: str = "DRIVESTYLE_API_KEY"
    temperature: float = 0.5
    max_output_tokens: int = 500
    timeout_s: float = 30.0
    max_attempts: int = 3
    backoff_s: float = 1.0


@dataclass
class PromptDocument:
    """A rendered prompt: instruction, one-shot exemplar, target block."""

    instruction: str
    example_block: str
    example_response: str
    target_block: str

    def render(self) -> str:
        return (
            f"{self.instruction}\n"
            f"\n"
            f"Example input:\n{self.example_block}\n"
            f"\n"
            f"Example output:\n{self.example_response}\n"
            f"\n"
            f"Input:\n{self.target_block}\n"
            f"\n"
            f"Output:"
        )


def format_feature_block(fv: FeatureVector) -> str:
    """One ``name: value`` line per feature, values at 9 decimal places."""
    return "\n".join(f"{name}: {value:.9f}" for name, value in zip(fv.names, fv.values))


def build_prompt(fv: FeatureVector) -> PromptDocument:
    return PromptDocument(
        instruction=PROMPT_INSTRUCTION,
        example_block=EXAMPLE_FEATURE_BLOCK,
        example_response=EXAMPLE_RESPONSE,
        target_block=format_feature_block(fv),
    )


def feature_hash(fv: FeatureVector) -> str:
    """Hex SHA-256 over the feature names and exact little-endian float64
    bytes of the values."""
    digest = hashlib.sha256()
    for name in fv.names:
        digest.update(name.encode("utf-8"))
        digest.update(b"\x00")
    digest.update(np.ascontiguousarray(fv.values, dtype="<f8").tobytes())
    return digest.hexdigest()


def semantic_cache_key(fv: FeatureVector, model_id: str) -> str:
    return text_key("semantic-v1", feature_hash(fv), model_id)


@dataclass
class SemanticDescription:
    text: str
    source: str  # "remote" or "fallback"
    model_id: str
    feature_key: str
    cached: bool = False


# ---------------------------------------------------------------------------
# remote describer


def describe_remote(
    prompt: str, config: LlmConfig, session=None, sleep=None
) -> str:
    """Fetch one description from a chat-completion endpoint."""
    api_key = require_api_key(config.api_key_env)
    payload = {
        "model": config.model_id,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": config.temperature,
        "max_tokens": config.max_output_tokens,
    }
    body = post_with_retries(
        url=config.endpoint,
        payload=payload,
        api_key=api_key,
        timeout_s=config.timeout_s,
        max_attempts=config.max_attempts,
        backoff_s=config.backoff_s,
        session=session,
        sleep=sleep,
    )
    try:
        text = body["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError):
        raise MalformedResponseError("response missing choices[0].message.content") from None
    if not isinstance(text, str) or not text.strip():
        raise MalformedResponseError("response content empty")
    return text.strip()


# ---------------------------------------------------------------------------
# offline fallback describer

_LOW, _HIGH = -0.5, 0.5

_TRAIT_FEATURES = {
    "speed": ("speed_mean",),
    "volatility": ("acceleration_std", "acceleration_change_rate"),
    "events": ("num_hard_accelerations", "num_hard_brakes", "num_hard_turns"),
    "roughness": ("jerk_std", "speed_change_rate"),
}

_TRAIT_SENTENCES = {
    "speed": (
        "The driver travels at low overall speeds.",
        "The driver travels at typical overall speeds.",
        "The driver travels at high overall speeds.",
    ),
    "volatility": (
        "Acceleration patterns are steady.",
        "Acceleration patterns are moderately variable.",
        "Acceleration patterns are highly volatile.",
    ),
    "events": (
        "Hard acceleration or braking events are rare.",
        "Occasional hard acceleration or braking events occur.",
        "Frequent hard acceleration and braking events point to an "
        "aggressive driving style.",
    ),
    "roughness": (
        "Speed transitions are smooth and gradual.",
        "Speed transitions are somewhat uneven.",
        "Speed transitions are abrupt and jerky.",
    ),
}

_OVERALL_SENTENCES = (
    "Overall, the segment shows a calm, conservative tendency.",
    "Overall, the segment shows a moderate tendency.",
    "Overall, the segment shows a forceful, assertive tendency.",
)


def _bin(z: float) -> int:
    """Map a z-score to 0 (low), 1 (moderate) or 2 (high)."""
    if z < _LOW:
        return 0
    if z > _HIGH:
        return 2
    return 1


def describe_fallback(fv: FeatureVector) -> str:
    """Deterministic template describer over four z-score traits.

    Each trait averages the normalized values of the features backing it
    (missing features are skipped; a trait with no backing features reads
    as zero) and is binned at -0.5 and 0.5.
    """
    by_name = fv.as_dict()
    sentences = []
    trait_scores = []
    for trait, names in _TRAIT_FEATURES.items():
        present = [by_name[n] for n in names if n in by_name]
        z = float(np.mean(present)) if present else 0.0
        trait_scores.append(z)
        sentences.append(_TRAIT_SENTENCES[trait][_bin(z)])
    sentences.append(_OVERALL_SENTENCES[_bin(float(np.mean(trait_scores)))])
    return " ".join(sentences)


# ---------------------------------------------------------------------------
# orchestration


def describe(
    fv: FeatureVector,
    config: LlmConfig | None = None,
    cache: TextCache | None = None,
    session=None,
    sleep=None,
) -> SemanticDescription:
    """Describe one normalized feature vector, consulting the cache first.

    A configured ``endpoint`` selects the remote describer; otherwise the
    offline fallback runs.  Cache hits never touch the network.
    """
    if config is None:
        config = LlmConfig()
    remote = bool(config.endpoint)
    model_id = config.model_id if remote else FALLBACK_MODEL_ID
    key = semantic_cache_key(fv, model_id)
    if cache is not None:
        record = cache.get(key)
        if record is not None:
            return SemanticDescription(
                text=record.body,
                source=record.source,
                model_id=record.model_id,
                feature_key=key,
                cached=True,
            )
    if remote:
        text = describe_remote(build_prompt(fv).render(), config, session, sleep)
        source = "remote"
    else:
        text = describe_fallback(fv)
        source = "fallback"
    if cache is not None:
        cache.put(key, CacheRecord(body=text, model_id=model_id, source=source))
    return SemanticDescription(
        text=text, source=source, model_id=model_id, feature_key=key, cached=False
    )


def describe_batch(
    vectors: list[FeatureVector],
    config: LlmConfig | None = None,
    cache: TextCache | None = None,
    session=None,
    sleep=None,
) -> list[SemanticDescription]:
    return [describe(fv, config, cache, session, sleep) for fv in vectors]
