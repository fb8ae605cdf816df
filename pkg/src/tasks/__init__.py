"""Tasks: end-to-end pipelines with progress reporting."""
