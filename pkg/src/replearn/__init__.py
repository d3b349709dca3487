"""Multi-task representation learning with shared trunks and per-task heads."""
