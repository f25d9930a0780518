"""Toolkit for probing neural-audio-codec latent sequences for nuclear
intonational tunes.

The pipeline: locate the final accented word of each utterance via its
TextGrid alignment, pool that word's latent frames with decay weighting,
reduce with PCA, then train softmax probes (linear or one-hidden-layer)
to predict the tune class. A synthetic contour corpus and a k-means
VQ/RVQ quantizer make the whole chain testable at desk scale.
"""

__version__ = "0.1.0"
