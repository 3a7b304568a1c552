"""
Scoring a stream run
====================

Accuracy, multiclass MCC from a confusion matrix and rank-based AUC,
plus matching detections against known drift points.
"""

from ipdd.metrics import accuracy, auc, confusion_matrix, drift_accounting, mcc

truth = [0, 0, 0, 0, 1, 1, 1, 1, 1, 1]
guess = [0, 0, 0, 1, 1, 1, 1, 1, 0, 0]
print("accuracy", accuracy(truth, guess))
cm = confusion_matrix(truth, guess, num_classes=2)
print("confusion matrix (rows are truth)\n", cm)
print("mcc", mcc(cm))

# ties in the scores count as half a win
print("auc", auc([0, 0, 1, 1], [0.1, 0.4, 0.35, 0.8]))

# detections at chunks 21 and 40 against one true drift at chunk 20
report = drift_accounting([21, 40], [20], 5)
print("matched", report.matched, "false alarms", report.false_alarms, "delays", report.delays)
