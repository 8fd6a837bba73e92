from .bekm import bekm, greedy_assign, seed_centroids
from .blpa import Move, blpa, neighbor_counts, reassignment_profiles
from .schemas import (
    EmbeddingSet,
    PartitionConfig,
    PartitionMethod,
    ReassignmentProfile,
    ShardAssignment,
    ShardSizeSummary,
    shard_size_summary,
)
from .strategies import check_capacity, partition, random_partition
