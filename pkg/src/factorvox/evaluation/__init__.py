from .harness import EvalScheme, evaluate, writeReport, reportTable, exportEmbeddings
from .probes import ProbeMatrix, probeAccuracy, SpeakerEmbedder
from .metrics import codeMi, dtwAlign, contourMetrics, f0Metrics, pearson, cosine, symbolErrorRate

__all__ = ['EvalScheme', 'evaluate', 'writeReport', 'reportTable', 'exportEmbeddings',
           'ProbeMatrix', 'probeAccuracy', 'SpeakerEmbedder',
           'codeMi', 'dtwAlign', 'contourMetrics', 'f0Metrics', 'pearson', 'cosine', 'symbolErrorRate']
