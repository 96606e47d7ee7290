"""Synthetic similar-table benchmark forge.

Generate transformed table pairs with an LLM (or a deterministic mock),
benchmark retrieval over the result, mine hard negatives, train a small
contrastive projection, and audit splits for transitive label leakage.
"""

from .audit import (
    LeakageReport,
    PairSet,
    cohen_kappa,
    leakage_free_split,
    pair_graph_components,
    similarity_distribution,
    transitive_leakage,
)
from .bench import (
    EvalReport,
    IndexEntry,
    VectorIndex,
    build_index,
    evaluate,
    ndcg_at_k,
    recall_at_k,
    split_dataset,
    top_k,
)
from .config import RunConfig, build_run_config
from .embedding import (
    HashedBowEmbedder,
    RemoteEmbeddingProvider,
    cosine_similarity,
    fused_similarity,
)
from .llm import (
    ChatRequest,
    MockChatProvider,
    RemoteChatProvider,
    extract_json_object,
    generate_description,
)
from .mining import (
    Bm25Index,
    MiningConfig,
    bm25_scores,
    mine_hard_negatives,
    rrf_fuse,
)
from .pipeline import (
    GenerationResult,
    OperationKind,
    OperationPlan,
    apply_llm_op,
    apply_removal,
    apply_reordering,
    eligible_ops,
    run_pipeline,
    sample_plan,
    validate_transformed,
)
from .seeds import derive_seed
from .serialize import to_embedding_text, to_llm_json, truncate_tokens
from .tables import (
    ColumnKind,
    Table,
    cell_is_numeric,
    infer_column_kinds,
    is_numerical_table,
    parse_table,
    write_table,
)
from .trainer import (
    ProjectionModel,
    TrainConfig,
    TrainSample,
    infonce_loss,
    loss_from_logits,
    loss_gradient,
    temperature_scaled_cosine,
    train,
)

__version__ = "0.1.0"
