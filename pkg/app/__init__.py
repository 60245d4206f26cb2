# Progressive self-attention GANs for time series
