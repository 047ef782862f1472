"""Two-hop decode-and-forward molecular link with reversible receivers.

Analytical bit error probability from the Skellam slot-count model and a
particle Monte Carlo to check it against.
"""

__version__ = "0.1.0"
