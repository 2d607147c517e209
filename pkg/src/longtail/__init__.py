"""longtail: gapped-window CNN and CNN+GRU tweet classifiers, from scratch.

A self-contained toolkit for short-text classification on numpy alone:
tweet normalization, pretrained-embedding ingestion, three convolutional
architectures (including skip-gram-style gapped windows) with hand-written
backward passes, a seeded k-fold training harness, per-class metrics, and
the long-tail uniqueness analysis that motivates the whole thing.
"""

from .analysis import (AtpReport, UniquenessReport, additional_true_positives,
                       atp_distribution, bin_score, distribution, unique_words, uniqueness)
from .errors import (ArgumentError, BuildError, DataError, FormatError, InputError,
                     LongtailError, NumericError, ParseError, ShapeError)
from .evaluation import (ConfusionMatrix, EvalReport, PRF, average_reports, confusion,
                         evaluate, macro_f1, micro_f1, prf_per_class)
from .layers import (Conv1d, Dense, GruLayer, WindowShape, dropout, gapped_window_shapes,
                     global_maxpool, maxpool1d)
from .models import (Model, ModelConfig, build_model, load_state_into, load_weights,
                     save_weights)
from .numeric import RngStream, Tensor, matmul, relu, rng_uniform, softmax
from .preprocess import (Lexicon, ProcessedTweet, RawTweet, collapse_elongation,
                         load_contractions, load_dataset, normalize, normalize_dataset,
                         segment_hashtag)
from .training import (AdamState, CrossValResult, FoldSplit, TrainRecord, adam_step,
                       cross_entropy, cross_validate, kfold_split, predict_labels, train)
from .vocab import (EmbeddingMatrix, EmbeddingTable, Vocabulary, build_matrix, decode,
                    encode, encode_dataset, load_embeddings)

__version__ = "0.1.0"
