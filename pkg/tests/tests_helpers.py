import numpy as np

from paintword.losses import LossBreakdown, Objective


class QuadraticObjective(Objective):
    differentiable = True

    def __init__(self, dim=6):
        self.dim = dim

    def evaluate(self, v):
        v = np.asarray(v)
        return LossBreakdown(semantic=float(v @ v), image=0.0, lambda_img=0.0)

    def gradient(self, v):
        v = np.asarray(v)
        return self.evaluate(v), 2 * v
