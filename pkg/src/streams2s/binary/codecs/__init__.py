# Tensor container codecs
