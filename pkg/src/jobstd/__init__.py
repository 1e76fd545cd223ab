"""jobstd: standardize noisy job postings into taxonomy entities via
dictionary tagging, content- and market-aware ranking, and a user feedback
loop that retrains the rankers."""

__version__ = "0.1.0"
