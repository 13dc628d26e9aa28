"""qpg: numerical certification of privacy, stability, and generalization
properties of classical-quantum learning algorithms on desk-scale instances.
"""

__version__ = "0.1.0"
