# vim: set filetype=python fileencoding=utf-8:
# -*- coding: utf-8 -*-

#============================================================================#
#                                                                            #
#  Licensed under the Apache License, Version 2.0 (the "License");           #
#  you may not use this file except in compliance with the License.          #
#  You may obtain a copy of the License at                                   #
#                                                                            #
#      http://www.apache.org/licenses/LICENSE-2.0                            #
#                                                                            #
#  Unless required by applicable law or agreed to in writing, software       #
#  distributed under the License is distributed on an "AS IS" BASIS,         #
#  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.  #
#  See the License for the specific language governing permissions and       #
#  limitations under the License.                                            #
#                                                                            #
#============================================================================#



''' Scale-invariant signal-to-noise ratios and training objectives. '''


from __future__ import annotations

from . import __
from . import exceptions as _exceptions
from . import signals as _signals


DECIBEL_LIMIT = 60.0


class LossWeights( __.ccstd.DataclassObject ):
    ''' Weights of multi-scale separation loss and speaker cross-entropy.

        Scale weights are ordered shortest filter first.
    '''

    scale_weights: tuple[ float, float, float ] = ( 0.8, 0.1, 0.1 )
    ce_weight: float = 0.5
    center: bool = True
    limit_db: float = DECIBEL_LIMIT

    def __post_init__( self ) -> None:
        if 3 != len( self.scale_weights ): # noqa: PLR2004
            raise _exceptions.ConfigurationError(
                'objectives', 'exactly three scale weights required' )
        if min( self.scale_weights ) < 0:
            raise _exceptions.ConfigurationError(
                'objectives', 'scale weights must be non-negative' )
        if not __.math.isclose(
            sum( self.scale_weights ), 1.0, abs_tol = 1e-9
        ):
            raise _exceptions.ConfigurationError(
                'objectives',
                f"scale weights must sum to 1, got {self.scale_weights}" )
        if self.ce_weight < 0:
            raise _exceptions.ConfigurationError(
                'objectives', 'ce_weight must be non-negative' )
        if self.limit_db <= 0:
            raise _exceptions.ConfigurationError(
                'objectives', 'limit_db must be positive' )


class MultitaskTerms( __.typx.NamedTuple ):
    ''' Total objective and its two weighted components. '''

    total: __.Tensor
    separation: __.Tensor
    classification: __.Tensor


def si_snr(
    estimate: __.typx.Annotated[
        __.Tensor, __.ddoc.Doc( ''' Samples [ ..., length ]. ''' )
    ],
    reference: __.typx.Annotated[
        __.Tensor, __.ddoc.Doc( ''' Samples [ ..., length ]. ''' )
    ],
    center: __.typx.Annotated[
        bool, __.ddoc.Doc( ''' Remove means before projection? ''' )
    ] = True,
    limit_db: __.typx.Annotated[
        float, __.ddoc.Doc( ''' Magnitude at which values are clamped. ''' )
    ] = DECIBEL_LIMIT,
) -> __.Tensor:
    ''' Scale-invariant SNR in decibels over the last dimension.

        The estimate is projected onto the reference; the ratio of
        projection energy to residual energy is reported. A perfect
        estimate yields the ceiling, a zero estimate the floor. Gradients
        stay finite at both clamps.
    '''
    if estimate.shape[ -1 ] != reference.shape[ -1 ]:
        raise _exceptions.SignalLengthError(
            'estimate', estimate.shape[ -1 ],
            f"equal to reference length {reference.shape[ -1 ]}" )
    if center:
        estimate = estimate - estimate.mean( dim = -1, keepdim = True )
        reference = reference - reference.mean( dim = -1, keepdim = True )
    reference_energy = reference.pow( 2 ).sum( dim = -1, keepdim = True )
    if bool( ( reference_energy <= 0 ).any( ) ):
        raise _exceptions.SilentSignalError( 'SI-SNR reference' )
    scale = ( estimate * reference ).sum(
        dim = -1, keepdim = True ) / reference_energy
    projection = scale * reference
    residual = estimate - projection
    target_energy = projection.pow( 2 ).sum( dim = -1 )
    error_energy = residual.pow( 2 ).sum( dim = -1 )
    # Substitute unit energies where zero so log and its gradient stay finite.
    ones = __.torch.ones_like( target_energy )
    target_live = target_energy > 0
    error_live = error_energy > 0
    ratio = 10 * (
        __.torch.log10( __.torch.where( target_live, target_energy, ones ) )
        - __.torch.log10( __.torch.where( error_live, error_energy, ones ) ) )
    ratio = __.torch.where(
        error_live, ratio, __.torch.full_like( ratio, limit_db ) )
    ratio = __.torch.where(
        target_live, ratio, __.torch.full_like( ratio, -limit_db ) )
    return ratio.clamp( -limit_db, limit_db )


def si_sdr(
    estimate: __.Tensor,
    reference: __.Tensor,
    center: bool = True,
    limit_db: float = DECIBEL_LIMIT,
) -> __.Tensor:
    ''' Scale-invariant SDR in decibels.

        Same mean-centered projection as :func:`si_snr`; named separately
        as the evaluation metric.
    '''
    return si_snr( estimate, reference, center = center, limit_db = limit_db )


def measure_si_sdr(
    estimate: _signals.Waveform, reference: _signals.Waveform
) -> float:
    ''' SI-SDR of one waveform against another, in double precision. '''
    if estimate.sample_rate != reference.sample_rate:
        raise _exceptions.SampleRateMismatchError(
            reference.sample_rate, estimate.sample_rate, 'estimate' )
    value = si_sdr(
        __.torch.from_numpy( estimate.samples ),
        __.torch.from_numpy( reference.samples ) )
    return float( value.item( ) )


def multiscale_si_snr_loss(
    estimates: __.typx.Annotated[
        __.cabc.Sequence[ __.Tensor ],
        __.ddoc.Doc( ''' Decoder outputs, shortest filter first. ''' ),
    ],
    reference: __.Tensor,
    weights: LossWeights,
) -> __.Tensor:
    ''' Negative weighted sum of per-scale SI-SNRs, averaged over batch. '''
    if len( estimates ) != len( weights.scale_weights ):
        raise _exceptions.DimensionMismatchError(
            'decoder estimates',
            len( weights.scale_weights ), len( estimates ) )
    total = sum(
        weight * si_snr(
            estimate, reference,
            center = weights.center, limit_db = weights.limit_db )
        for weight, estimate in zip(
            weights.scale_weights, estimates, strict = True ) )
    return -__.torch.as_tensor( total ).mean( )


def cross_entropy(
    logits: __.typx.Annotated[
        __.Tensor, __.ddoc.Doc( ''' Speaker scores [ batch, speakers ]. ''' )
    ],
    labels: __.typx.Annotated[
        __.Tensor, __.ddoc.Doc( ''' Speaker indices [ batch ]. ''' )
    ],
) -> __.Tensor:
    ''' Mean negative log-likelihood of true speakers. '''
    classes_count = logits.shape[ -1 ]
    invalid = ( labels < 0 ) | ( labels >= classes_count )
    if bool( invalid.any( ) ):
        label = int( labels[ invalid ][ 0 ].item( ) )
        raise _exceptions.LabelRangeError( label, classes_count )
    return __.nn.functional.cross_entropy( logits, labels )


def calculate_multitask_terms(
    estimates: __.cabc.Sequence[ __.Tensor ],
    reference: __.Tensor,
    logits: __.Tensor,
    labels: __.Tensor,
    weights: LossWeights,
) -> MultitaskTerms:
    ''' Separation loss, weighted cross-entropy, and their sum. '''
    separation = multiscale_si_snr_loss( estimates, reference, weights )
    classification = weights.ce_weight * cross_entropy( logits, labels )
    return MultitaskTerms(
        total = separation + classification,
        separation = separation,
        classification = classification )


def multitask_loss(
    estimates: __.cabc.Sequence[ __.Tensor ],
    reference: __.Tensor,
    logits: __.Tensor,
    labels: __.Tensor,
    weights: LossWeights,
) -> __.Tensor:
    ''' Joint objective for separator and speaker embedder. '''
    return calculate_multitask_terms(
        estimates, reference, logits, labels, weights ).total
