"""qgeval: question-generation evaluation metrics and analysis pipeline.

Layers:
    textkit     tokenization, n-grams, LCS, Porter stemming
    metrics     BLEU / GLEU / ROUGE-L / METEOR / Answerability / BERTScore
    qascore     reference-free masked-LM scoring (mock or bridge model)
    stats       rank tests, correlations, Williams test, distributions
    humaneval   HIT building, worker QC, z-scores, significance matrices
    simulate    synthetic rating corpora for pipeline validation
    cli         the `qgeval` command
"""

__version__ = "0.1.0"
