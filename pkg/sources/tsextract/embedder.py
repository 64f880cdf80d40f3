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



''' ResNet speaker embedder and speaker classification head. '''


from __future__ import annotations

from . import __
from . import exceptions as _exceptions


POOLING_SIZE = 3


class EmbedderConfig( __.ccstd.DataclassObject ):
    ''' Settings for speaker embedder. '''

    block_dims: tuple[ tuple[ int, int ], ... ] = (
        ( 256, 256 ), ( 256, 512 ), ( 512, 512 ) )
    embedding_dim: int = 256
    length_normalize: bool = False

    def __post_init__( self ) -> None:
        if not self.block_dims:
            raise _exceptions.ConfigurationError(
                'embedder', 'at least one residual block required' )
        for ( _, out_dim ), ( in_dim, _ ) in zip(
            self.block_dims, self.block_dims[ 1 : ], strict = False
        ):
            if out_dim != in_dim:
                raise _exceptions.ConfigurationError(
                    'embedder',
                    f"block dimensions do not chain: {self.block_dims}" )
        if self.embedding_dim <= 0:
            raise _exceptions.ConfigurationError(
                'embedder', 'embedding_dim must be positive' )


class ResidualBlock( __.nn.Module ):
    ''' Pointwise residual block with frame max-pooling.

        Pooling windows of 3 frames at stride 3; a trailing partial window
        pools over the frames it has, so one input frame yields one output
        frame.
    '''

    def __init__( self, in_dim: int, out_dim: int ) -> None:
        super( ).__init__( )
        self.in_dim, self.out_dim = in_dim, out_dim
        self.conv1 = __.nn.Conv1d( in_dim, out_dim, 1, bias = False )
        self.norm1 = __.nn.BatchNorm1d( out_dim )
        self.activation1 = __.nn.PReLU( )
        self.conv2 = __.nn.Conv1d( out_dim, out_dim, 1, bias = False )
        self.norm2 = __.nn.BatchNorm1d( out_dim )
        self.skip = (
            __.nn.Conv1d( in_dim, out_dim, 1, bias = False )
            if in_dim != out_dim else __.nn.Identity( ) )
        self.activation2 = __.nn.PReLU( )

    def forward(
        self,
        features: __.typx.Annotated[
            __.FeatureMap,
            __.ddoc.Doc( ''' Features [ batch, frames, in_dim ]. ''' ),
        ],
    ) -> __.FeatureMap:
        if features.shape[ -1 ] != self.in_dim:
            raise _exceptions.DimensionMismatchError(
                'residual block input', self.in_dim, features.shape[ -1 ] )
        x = features.transpose( 1, 2 )
        y = self.activation1( self.norm1( self.conv1( x ) ) )
        y = self.norm2( self.conv2( y ) )
        y = self.activation2( y + self.skip( x ) )
        excess = -y.shape[ -1 ] % POOLING_SIZE
        if excess:
            y = __.nn.functional.pad( y, ( 0, excess ), mode = 'replicate' )
        y = __.nn.functional.max_pool1d( y, POOLING_SIZE, POOLING_SIZE )
        return y.transpose( 1, 2 )


class SpeakerEmbedder( __.nn.Module ):
    ''' Residual stack, pointwise projection, and mean pooling over time.

        Consumes bottleneck features of reference speech produced by the
        shared multi-scale encoder.
    '''

    def __init__( self, config: EmbedderConfig ) -> None:
        super( ).__init__( )
        self.config = config
        self.blocks = __.nn.ModuleList(
            ResidualBlock( in_dim, out_dim )
            for in_dim, out_dim in config.block_dims )
        self.projection = __.nn.Conv1d(
            config.block_dims[ -1 ][ 1 ], config.embedding_dim, 1 )

    @property
    def input_dim( self ) -> int:
        ''' Channel dimension expected from the bottleneck. '''
        return self.config.block_dims[ 0 ][ 0 ]

    def forward( self, features: __.FeatureMap ) -> __.SpeakerEmbedding:
        for block in self.blocks: features = block( features )
        projected = self.projection( features.transpose( 1, 2 ) )
        embedding = projected.mean( dim = -1 )
        if self.config.length_normalize:
            embedding = __.nn.functional.normalize( embedding, dim = -1 )
        return embedding


class SpeakerHead( __.nn.Module ):
    ''' Linear speaker classifier over embeddings. '''

    def __init__( self, embedding_dim: int, speakers_count: int ) -> None:
        super( ).__init__( )
        if speakers_count < 2: # noqa: PLR2004
            raise _exceptions.ConfigurationError(
                'embedder', 'speaker head needs at least 2 speakers' )
        self.embedding_dim = embedding_dim
        self.classifier = __.nn.Linear( embedding_dim, speakers_count )

    def forward( self, embedding: __.SpeakerEmbedding ) -> __.Tensor:
        ''' Returns logits [ batch, speakers ]. '''
        if embedding.shape[ -1 ] != self.embedding_dim:
            raise _exceptions.DimensionMismatchError(
                'embedding', self.embedding_dim, embedding.shape[ -1 ] )
        return self.classifier( embedding )


def speaker_accuracy( logits: __.Tensor, labels: __.Tensor ) -> float:
    ''' Fraction of correctly classified speakers. '''
    if 0 == labels.numel( ): return 0.0
    predictions = logits.argmax( dim = -1 )
    return int( ( predictions == labels ).sum( ) ) / labels.numel( )


def cosine_similarity(
    first: __.SpeakerEmbedding, second: __.SpeakerEmbedding
) -> __.Tensor:
    ''' Cosine similarity of embeddings along last dimension. '''
    return __.nn.functional.cosine_similarity( first, second, dim = -1 )
