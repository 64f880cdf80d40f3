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



''' Multi-scale learned encoder, bottleneck, and multi-scale decoder.

    All scales share one frame stride. Longer filters see the input with
    symmetric zero padding of ``L_scale - L_short`` samples, so every scale
    produces the same number of frames as the shortest one.
'''


from __future__ import annotations

from . import __
from . import exceptions as _exceptions


class Scales( str, __.enum.Enum ):
    ''' Filter length scales of the multi-scale encoder and decoder. '''

    Short = 'short'
    Mid = 'mid'
    Long = 'long'


class FrontendConfig( __.ccstd.DataclassObject ):
    ''' Settings for encoder, bottleneck, and decoder. '''

    sample_rate: int = 16000
    filter_lengths_ms: tuple[ float, float, float ] = ( 2.5, 10.0, 20.0 )
    channels_per_scale: int = 256
    bottleneck_dim: int = 256
    stride: int | None = None

    def __post_init__( self ) -> None:
        lengths = self.filter_lengths
        if len( lengths ) != len( Scales ):
            raise _exceptions.ConfigurationError(
                'frontend', 'exactly three filter lengths required' )
        if lengths[ 0 ] < 2 or any( # noqa: PLR2004
            short >= long for short, long in zip(
                lengths, lengths[ 1 : ], strict = False )
        ):
            raise _exceptions.ConfigurationError(
                'frontend',
                f"filter lengths must increase strictly, got {lengths}" )
        if self.stride is not None and self.stride <= 0:
            raise _exceptions.ConfigurationError(
                'frontend', 'stride must be positive' )
        if self.channels_per_scale <= 0 or self.bottleneck_dim <= 0:
            raise _exceptions.ConfigurationError(
                'frontend', 'channel dimensions must be positive' )

    @property
    def filter_lengths( self ) -> tuple[ int, ... ]:
        ''' Filter lengths in samples, shortest first. '''
        return tuple(
            round( milliseconds * self.sample_rate / 1000 )
            for milliseconds in self.filter_lengths_ms )

    @property
    def frame_stride( self ) -> int:
        ''' Shared hop between frames in samples. '''
        if self.stride is not None: return self.stride
        return self.filter_lengths[ 0 ] // 2

    @property
    def paddings( self ) -> tuple[ tuple[ int, int ], ... ]:
        ''' Left and right input padding per scale. '''
        shortest = self.filter_lengths[ 0 ]
        paddings: list[ tuple[ int, int ] ] = [ ]
        for length in self.filter_lengths:
            excess = length - shortest
            paddings.append( ( excess // 2, excess - excess // 2 ) )
        return tuple( paddings )

    def frame_count( self, length: int ) -> int:
        ''' Number of frames produced for input of length samples. '''
        return ( length - self.filter_lengths[ 0 ] ) // self.frame_stride + 1


class MultiscaleEncoder( __.nn.Module ):
    ''' Three learned filterbanks with rectified outputs. '''

    def __init__( self, config: FrontendConfig ) -> None:
        super( ).__init__( )
        self.config = config
        lengths = config.filter_lengths
        for scale, length in zip( Scales, lengths, strict = True ):
            self.add_module( scale.value, __.nn.Conv1d(
                1, config.channels_per_scale, length,
                stride = config.frame_stride, bias = False ) )

    def encode_scale(
        self,
        waveform: __.typx.Annotated[
            __.Tensor, __.ddoc.Doc( ''' Samples [ batch, length ]. ''' )
        ],
        scale: Scales | str,
    ) -> __.FeatureMap:
        ''' Encodes waveform with filterbank of one scale. '''
        scale = Scales( scale )
        self._validate( waveform )
        index = list( Scales ).index( scale )
        left, right = self.config.paddings[ index ]
        signal = __.nn.functional.pad(
            waveform.unsqueeze( 1 ), ( left, right ) )
        convolution = self.get_submodule( scale.value )
        features = __.torch.relu( convolution( signal ) )
        return features.transpose( 1, 2 )

    def forward(
        self, waveform: __.Tensor
    ) -> tuple[ __.FeatureMap, ... ]:
        ''' Encodes waveform at every scale. '''
        return tuple(
            self.encode_scale( waveform, scale ) for scale in Scales )

    def encode_multiscale( self, waveform: __.Tensor ) -> __.FeatureMap:
        ''' Channel-wise concatenation of all scales. '''
        return __.torch.cat( self( waveform ), dim = -1 )

    def _validate( self, waveform: __.Tensor ) -> None:
        if 2 != waveform.dim( ): # noqa: PLR2004
            raise _exceptions.DimensionMismatchError(
                'waveform rank', 2, waveform.dim( ) )
        shortest = self.config.filter_lengths[ 0 ]
        if waveform.shape[ -1 ] < shortest:
            raise _exceptions.SignalLengthError(
                'waveform', waveform.shape[ -1 ],
                f"at least {shortest} samples" )


class Bottleneck( __.nn.Module ):
    ''' Per-frame layer normalization and pointwise projection. '''

    def __init__( self, config: FrontendConfig ) -> None:
        super( ).__init__( )
        self.input_dim = len( Scales ) * config.channels_per_scale
        self.norm = __.nn.LayerNorm( self.input_dim )
        self.projection = __.nn.Linear( self.input_dim, config.bottleneck_dim )

    def forward( self, features: __.FeatureMap ) -> __.FeatureMap:
        if features.shape[ -1 ] != self.input_dim:
            raise _exceptions.DimensionMismatchError(
                'bottleneck input', self.input_dim, features.shape[ -1 ] )
        return self.projection( self.norm( features ) )


class MultiscaleDecoder( __.nn.Module ):
    ''' Overlap-add synthesis with learned basis filters per scale. '''

    def __init__( self, config: FrontendConfig ) -> None:
        super( ).__init__( )
        self.config = config
        lengths = config.filter_lengths
        for scale, length in zip( Scales, lengths, strict = True ):
            self.add_module( scale.value, __.nn.ConvTranspose1d(
                config.channels_per_scale, 1, length,
                stride = config.frame_stride, bias = False ) )

    def decode_scale(
        self,
        features: __.typx.Annotated[
            __.FeatureMap,
            __.ddoc.Doc(
                ''' Masked features [ batch, frames, channels ]. ''' ),
        ],
        scale: Scales | str,
        output_length: int,
    ) -> __.Tensor:
        ''' Reconstructs waveform of exact length from one scale. '''
        scale = Scales( scale )
        channels = self.config.channels_per_scale
        if features.shape[ -1 ] != channels:
            raise _exceptions.DimensionMismatchError(
                f"{scale.value} decoder input",
                channels, features.shape[ -1 ] )
        index = list( Scales ).index( scale )
        left, _ = self.config.paddings[ index ]
        convolution = self.get_submodule( scale.value )
        signal = convolution( features.transpose( 1, 2 ) ).squeeze( 1 )
        signal = signal[ :, left : left + output_length ]
        deficit = output_length - signal.shape[ -1 ]
        if deficit > 0:
            signal = __.nn.functional.pad( signal, ( 0, deficit ) )
        return signal

    def forward(
        self,
        features: __.cabc.Sequence[ __.FeatureMap ],
        output_length: int,
    ) -> tuple[ __.Tensor, ... ]:
        ''' Reconstructs waveforms from every scale. '''
        return tuple(
            self.decode_scale( feature, scale, output_length )
            for feature, scale in zip( features, Scales, strict = True ) )
