import numpy as np


class QuadratureRule:
    """Points and weights on the reference triangle {(0,0),(1,0),(0,1)} or square [-1,1]^2."""

    def __init__(self, kind, points, weights, degree, domain):
        self.kind = kind
        self.points = np.array(points, dtype=float).reshape(-1, 2)
        self.weights = np.array(weights, dtype=float)
        self.degree = degree
        self.domain = domain
        self.points.setflags(write=False)
        self.weights.setflags(write=False)

    def __repr__(self):
        return f"<QuadratureRule {self.kind} points={len(self.weights)} degree={self.degree}>"

    def __len__(self):
        return len(self.weights)

    @property
    def measure(self):
        return 0.5 if self.domain == 'triangle' else 4.0

    def integrate(self, function):
        """Integrate a function of natural coordinates over the reference domain"""
        values = np.asarray(function(self.points), dtype=float)
        return float(np.dot(self.weights, values))

    def refined(self, factor):
        """Composite rule over a uniform factor x factor split of the reference domain"""
        if factor == 1:
            return self
        points = []
        weights = []
        if self.domain == 'square':
            size = 2.0 / factor
            for i in range(factor):
                for j in range(factor):
                    center = np.array([-1.0 + size * (i + 0.5), -1.0 + size * (j + 0.5)])
                    points.append(center + 0.5 * size * self.points)
                    weights.append(self.weights * (0.5 * size) ** 2)
        else:
            h = 1.0 / factor
            for i in range(factor):
                for j in range(factor - i):
                    origin = np.array([i * h, j * h])
                    points.append(origin + h * self.points)
                    weights.append(self.weights * h * h)
                    if i + j < factor - 1:
                        # Flipped triangle filling the rest of the square cell
                        corner = np.array([(i + 1) * h, (j + 1) * h])
                        points.append(corner - h * self.points)
                        weights.append(self.weights * h * h)
        return QuadratureRule(f"{self.kind}x{factor}", np.vstack(points), np.concatenate(weights),
                              self.degree, self.domain)
