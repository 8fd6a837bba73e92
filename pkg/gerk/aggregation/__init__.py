from .aggregators import maj_aggr, mean_aggr, weighted_predict
from .optimal import fit_scores, opt_aggr_train, sample_score_nodes
from .schemas import AggregationMode, ImportanceScores, OptAggrConfig, ShardPosteriors
