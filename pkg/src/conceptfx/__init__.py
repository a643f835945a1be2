"""conceptfx: causal concept-effect estimation for text classifiers.

The package trains a small masked-language-model encoder in three stages
(pretraining, adversarial counterfactual fine-tuning, frozen-encoder task
training), then compares classifiers built on the original and counterfactual
representations to estimate how much a human-interpretable concept (gender,
race, adjectives, a topic) moves the classifier's output distribution.
Synthetic corpora with exact counterfactual twins provide ground truth for
validating the estimates.
"""

__version__ = "0.1.0"
