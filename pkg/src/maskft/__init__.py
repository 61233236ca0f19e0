"""Knowledge injection by fine-tuning: causal, masked-recovery and masked-diffusion objectives
on small from-scratch transformers."""
