"""Figure rendering for analysis-bundle CSVs.

Strictly a consumer: every number on a figure comes verbatim from an input
CSV, and dump-back mode re-emits the plotted table so that claim can be
checked byte for byte.
"""

__version__ = "0.1.0"
