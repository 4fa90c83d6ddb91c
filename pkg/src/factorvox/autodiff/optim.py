import numpy as np


class AdamState():
    """Moment buffers and hyperparameters for one Adam optimizer."""

    def __init__(self, learningRate: float, beta1: float, beta2: float, eps: float):
        self.learningRate = learningRate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step = 0
        self.firstMoments = {}
        self.secondMoments = {}


class Adam():
    """Adam with bias correction over a name -> Parameter mapping.

    Gradients are left in place after `step`; callers reset them with `zeroGrad`.
    """

    def __init__(self,
                 parameters: dict,
                 learningRate: float = 2e-4,
                 beta1: float = 0.9,
                 beta2: float = 0.999,
                 eps: float = 1e-8):
        self.parameters = dict(parameters)
        self.state = AdamState(learningRate, beta1, beta2, eps)
        for name, param in self.parameters.items():
            self.state.firstMoments[name] = np.zeros_like(param.data)
            self.state.secondMoments[name] = np.zeros_like(param.data)

    def step(self):
        missing = [name for name, param in self.parameters.items() if param.grad is None]
        if missing:
            raise ValueError(f"adam_step: registered parameters have no gradient: {', '.join(missing)}")

        state = self.state
        state.step += 1
        firstCorrection = 1.0 - state.beta1 ** state.step
        secondCorrection = 1.0 - state.beta2 ** state.step
        for name, param in self.parameters.items():
            grad = param.grad
            m = state.firstMoments[name]
            v = state.secondMoments[name]
            m *= state.beta1
            m += (1.0 - state.beta1) * grad
            v *= state.beta2
            v += (1.0 - state.beta2) * grad * grad
            update = state.learningRate * (m / firstCorrection) / (np.sqrt(v / secondCorrection) + state.eps)
            param.data -= update.astype(param.data.dtype)

    def zeroGrad(self):
        for param in self.parameters.values():
            param.grad = None

    def stateDict(self) -> dict:
        tensors = {"step": np.array([self.state.step], dtype=np.float64)}
        for name in self.parameters:
            tensors[f"m.{name}"] = self.state.firstMoments[name]
            tensors[f"v.{name}"] = self.state.secondMoments[name]
        return tensors

    def loadStateDict(self, tensors: dict):
        self.state.step = int(np.asarray(tensors["step"]).reshape(-1)[0])
        for name, param in self.parameters.items():
            self.state.firstMoments[name] = np.asarray(tensors[f"m.{name}"], dtype=param.data.dtype).reshape(param.shape).copy()
            self.state.secondMoments[name] = np.asarray(tensors[f"v.{name}"], dtype=param.data.dtype).reshape(param.shape).copy()
