"""Numerical modules: tensor engine, denoiser, diffusion, samplers, data, geometry and benchmark."""
