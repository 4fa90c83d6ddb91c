from .discriminators import (MultiScaleDiscriminator, ScaleDiscriminator, hingeDiscriminatorLoss,
                             generatorHingeLoss, featureMatching, discLoss, genAdvLoss)

__all__ = ['MultiScaleDiscriminator', 'ScaleDiscriminator', 'hingeDiscriminatorLoss',
           'generatorHingeLoss', 'featureMatching', 'discLoss', 'genAdvLoss']
