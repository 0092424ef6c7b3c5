"""Reward stack for structured perception/think/answer completions.

Parsing and format scoring, scene-text alignment, lexical copy penalties,
likelihood-gain and semantic rewards, group-normalized advantages, the
GRPO loss, and a subtitle-derived dialogue dataset builder. All model
inference sits behind provider contracts so every number here is
reproducible from fixtures.
"""

__version__ = "0.1.0"

from .aggregation import (
    GroupBatch,
    GroupScoringError,
    RewardVector,
    ScoringContext,
    WeightVector,
    advantages,
    score_group,
    zscore_normalize,
)
from .embeddings import (
    EmbeddingMatrix,
    FileEmbeddingProvider,
    FileFrameStore,
    HashEmbeddingProvider,
    InMemoryFrameStore,
    RemoteEmbeddingProvider,
    cosine,
    embed_text,
    load_frame_embeddings,
)
from .grpo import (
    GrpoConfig,
    TokenLogProbs,
    grpo_loss,
    grpo_stats,
    importance_ratios,
    kl_estimate,
    toy_policy_grad_check,
)
from .lexical import (
    CleanResult,
    CueThresholds,
    answer_recall_rouge_l,
    clean_and_penalize,
    detect_cue,
    lcs_len,
    ngram_overlap,
    normalize,
    split_sentences,
)
from .pcg import (
    FileLikelihoodProvider,
    HashLikelihoodProvider,
    PcgInputs,
    RemoteLikelihoodProvider,
    gt_loglik,
    pcg,
)
from .semantic import PrfScore, TokenEmbeddings, bertscore_prf, semantic_reward
from .structure import (
    Completion,
    FormatScore,
    ReferenceOutput,
    format_reward,
    parse_completion,
    serialize_segments,
)
from .visual import AlignmentConfig, clip_max, clip_sent_topk, top_k_count, visual_reward
from .dataset import (
    DialogueSession,
    SubtitleLine,
    TrainingSample,
    build_sessions,
    parse_srt,
    split_by_session,
    split_turns,
)
