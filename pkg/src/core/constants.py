"""Package-wide constants."""

REPORT_SCHEMA_VERSION: int = 1

# Binary containers
MATRIX_FILE_MAGIC: bytes = b"STRUDNS1"
FORM_FILE_MAGIC: bytes = b"HSSF0001"
FORM_FILE_VERSION: int = 1

# Byte accounting: 8-byte reals and 8-byte indices
REAL_BYTES: int = 8
INDEX_BYTES: int = 8

# Dense kernel defaults
DEFAULT_SINGULAR_THRESHOLD: float = 1e-14
ID_ERROR_MULTIPLIER: float = 100.0

# Sampling defaults
DEFAULT_OVERSAMPLING: int = 10

# Random streams for the row and column sample matrices
ROW_STREAM: int = 0
COL_STREAM: int = 1

MATRIX_KINDS: tuple[str, ...] = ("toeplitz-simple", "toeplitz-qchem", "synthetic", "file")
TREE_KINDS: tuple[str, ...] = ("binary", "comb")
