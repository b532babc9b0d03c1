"""Post-processing figures for latkmc CSV output.

These scripts never recompute physics: they consume the CSV files (and their
reproducibility headers) emitted by the engine CLI, so archived CSVs can be
re-rendered with no engine installed.
"""

__version__ = "0.1.0"
