"""Call-receiver authentication from outer-ear acoustic echoes.

The pipeline emits a chirp sensing sequence from the earpiece, records the
echoes, aligns and denoises them, turns them into magnitude/phase differential
spectrograms, embeds those with a small CNN and decides with a one-class model.
Human recordings are replaced by a synthetic multipath ear simulator.
"""

__version__ = "0.1.0"

SAMPLE_RATE = 48000
