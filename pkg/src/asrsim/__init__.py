"""ASR-error channel learning and simulation from word confusion networks.

The toolkit learns which words an ASR decoder confuses (no human
transcripts needed), turns those confusions into a position-dependent
letter rewrite model, and uses the model to corrupt clean dialogue text
with realistic stochastic errors plus token-level corrective labels. A
separate module clusters knowledge-base titles into topics without
supervision.
"""

from .cn import (
    EPSILON,
    Alternative,
    ConfusionNetwork,
    ConfusionSlot,
    Hypothesis,
    NBestList,
    align_nbest_to_cn,
    parse_confusion_network,
    parse_nbest,
    parse_nbest_corpus,
    parse_sausage_corpus,
    serialize_confusion_network,
)
from .edit_model import (
    GAP,
    WORD_START,
    LetterAlignment,
    RewriteModel,
    WordPair,
    align_letters,
    estimate_model,
    extract_confusion_pairs,
    load_model,
    merge_models,
    save_model,
)
from .errors import ClusterMergeError, ModelError, ParseError, ToolkitError
from .kb import (
    KnowledgeCluster,
    KnowledgeEntry,
    PairExample,
    generate_pair_dataset,
    initial_clusters,
    jaccard_oracle,
    merge_clusters,
    normalize_title,
)
from .simulate import (
    Correction,
    CorruptionPolicy,
    CorruptionRecord,
    Dialogue,
    Edit,
    EditTrace,
    Turn,
    corrupt_dataset,
    corrupt_utterance,
    corrupt_word,
    replay_trace,
)

__version__ = "0.1.0"
