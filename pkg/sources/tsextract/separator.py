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



''' Mask estimation networks: TCN and conformer blocks, separator stacks.

    Blocks consume and produce time-major features [ batch, frames,
    channels ] and preserve the frame count. Convolutions run on
    transposed views internally.
'''


from __future__ import annotations

from . import __
from . import exceptions as _exceptions
from .frontend import Scales


class Architectures( str, __.enum.Enum ):
    ''' Available separator trunks. '''

    TcnBaseline = 'tcn_baseline'
    ConformerFfn = 'conformer_ffn'
    TcnConformer = 'tcn_conformer'


class ConvolutionGatings( str, __.enum.Enum ):
    ''' Activation layouts of the conformer convolution module. '''

    Swish = 'swish3x'
    Glu = 'glu2x'


class SeparatorConfig( __.ccstd.DataclassObject ):
    ''' Settings for separator trunk and its blocks. '''

    architecture: str = Architectures.TcnConformer.value
    stacks: int = 4
    model_dim: int = 512
    heads: int = 8
    conv_kernel: int = 31
    conv_expansion: int = 3
    conv_gating: str = ConvolutionGatings.Swish.value
    ffn_expansion: int = 4
    dropout: float = 0.1
    relative_distance: int = 64
    tcn_kernel: int = 3
    tcn_hidden: int = 512
    tcn_dilations: tuple[ int, ... ] = ( 1, )
    baseline_stacks: int = 4
    baseline_blocks: int = 8

    def __post_init__( self ) -> None: # noqa: C901
        def complain( reason: str ) -> __.typx.NoReturn:
            raise _exceptions.ConfigurationError( 'separator', reason )

        try: Architectures( self.architecture )
        except ValueError:
            complain( f"unknown architecture {self.architecture!r}" )
        try: ConvolutionGatings( self.conv_gating )
        except ValueError:
            complain( f"unknown conv_gating {self.conv_gating!r}" )
        if self.stacks < 1: complain( 'stacks must be at least 1' )
        if self.heads < 1 or self.model_dim % self.heads:
            complain(
                f"heads ({self.heads}) must divide "
                f"model_dim ({self.model_dim})" )
        for name in ( 'conv_kernel', 'tcn_kernel' ):
            if not getattr( self, name ) % 2:
                complain( f"{name} must be odd" )
        if not 0.0 <= self.dropout < 1.0:
            complain( 'dropout must lie in [0, 1)' )
        if not self.tcn_dilations or min( self.tcn_dilations ) < 1:
            complain( 'tcn_dilations must be positive' )
        if self.baseline_stacks < 1 or self.baseline_blocks < 1:
            complain( 'baseline stacks and blocks must be positive' )


class MaskSet( __.typx.NamedTuple ):
    ''' Non-negative masks, one per encoder scale. '''

    short: __.FeatureMap
    mid: __.FeatureMap
    long: __.FeatureMap


def concat_embedding(
    features: __.FeatureMap, embedding: __.SpeakerEmbedding
) -> __.FeatureMap:
    ''' Appends speaker embedding to every frame. '''
    frames = features.shape[ 1 ]
    repeated = embedding.unsqueeze( 1 ).expand( -1, frames, -1 )
    return __.torch.cat( ( features, repeated ), dim = -1 )


def count_parameters( module: __.nn.Module ) -> int:
    ''' Number of trainable scalars in module. '''
    return sum(
        parameter.numel( ) for parameter in module.parameters( )
        if parameter.requires_grad )


class GlobalLayerNorm( __.nn.Module ):
    ''' Normalization over all frames and channels of each utterance. '''

    def __init__( self, channels: int, epsilon: float = 1e-8 ) -> None:
        super( ).__init__( )
        self.epsilon = epsilon
        self.gain = __.nn.Parameter( __.torch.ones( 1, channels, 1 ) )
        self.bias = __.nn.Parameter( __.torch.zeros( 1, channels, 1 ) )

    def forward( self, x: __.Tensor ) -> __.Tensor:
        ''' Normalizes [ batch, channels, frames ]. '''
        mean = x.mean( dim = ( 1, 2 ), keepdim = True )
        variance = ( x - mean ).pow( 2 ).mean( dim = ( 1, 2 ), keepdim = True )
        normalized = ( x - mean ) / __.torch.sqrt( variance + self.epsilon )
        return self.gain * normalized + self.bias


class TcnBlock( __.nn.Module ):
    ''' Temporal convolution block with dilated depthwise convolution.

        With a nonzero embedding dimension, the speaker embedding is
        appended to every input frame and the residual path carries only
        the non-embedding channels.
    '''

    def __init__( # noqa: PLR0913
        self,
        io_dim: int,
        hidden_dim: int,
        kernel_size: int = 3,
        dilation: int = 1,
        embedding_dim: int = 0,
    ) -> None:
        super( ).__init__( )
        self.io_dim, self.embedding_dim = io_dim, embedding_dim
        self.kernel_size, self.dilation = kernel_size, dilation
        self.input_conv = __.nn.Conv1d( io_dim + embedding_dim, hidden_dim, 1 )
        self.activation1 = __.nn.PReLU( )
        self.norm1 = GlobalLayerNorm( hidden_dim )
        self.depthwise_conv = __.nn.Conv1d(
            hidden_dim, hidden_dim, kernel_size,
            dilation = dilation, padding = dilation * ( kernel_size - 1 ) // 2,
            groups = hidden_dim )
        self.activation2 = __.nn.PReLU( )
        self.norm2 = GlobalLayerNorm( hidden_dim )
        self.output_conv = __.nn.Conv1d( hidden_dim, io_dim, 1 )

    @property
    def receptive_field( self ) -> int:
        ''' Frames seen by one output frame. '''
        return 1 + ( self.kernel_size - 1 ) * self.dilation

    def forward(
        self,
        x: __.FeatureMap,
        embedding: __.SpeakerEmbedding | None = None,
    ) -> __.FeatureMap:
        if x.shape[ -1 ] != self.io_dim:
            raise _exceptions.DimensionMismatchError(
                'TCN block input', self.io_dim, x.shape[ -1 ] )
        y = x
        if self.embedding_dim:
            width = None if embedding is None else embedding.shape[ -1 ]
            if width != self.embedding_dim:
                raise _exceptions.DimensionMismatchError(
                    'TCN block embedding', self.embedding_dim,
                    width or 0 )
            y = concat_embedding( x, embedding )
        y = y.transpose( 1, 2 )
        y = self.norm1( self.activation1( self.input_conv( y ) ) )
        y = self.norm2( self.activation2( self.depthwise_conv( y ) ) )
        y = self.output_conv( y )
        return x + y.transpose( 1, 2 )


class RelativeSelfAttention( __.nn.Module ):
    ''' Multi-head self-attention with learned relative position keys.

        Relative distances are clipped to ``max_distance`` frames.
    '''

    def __init__(
        self,
        dim: int,
        heads: int,
        dropout: float = 0.0,
        max_distance: int = 64,
    ) -> None:
        super( ).__init__( )
        if heads < 1 or dim % heads:
            raise _exceptions.ConfigurationError(
                'separator', f"heads ({heads}) must divide dimension ({dim})" )
        self.dim, self.heads = dim, heads
        self.head_dim = dim // heads
        self.max_distance = max_distance
        self.query = __.nn.Linear( dim, dim )
        self.key = __.nn.Linear( dim, dim )
        self.value = __.nn.Linear( dim, dim )
        self.output = __.nn.Linear( dim, dim )
        self.relative_keys = __.nn.Embedding(
            2 * max_distance + 1, self.head_dim )
        self.dropout = __.nn.Dropout( dropout )

    def forward( self, x: __.FeatureMap ) -> tuple[ __.Tensor, __.Tensor ]:
        ''' Returns attended features and attention weights.

            Weights have shape [ batch, heads, frames, frames ] with rows
            summing to one.
        '''
        batch, frames, _ = x.shape
        shape = ( batch, frames, self.heads, self.head_dim )
        query = self.query( x ).view( shape ).transpose( 1, 2 )
        key = self.key( x ).view( shape ).transpose( 1, 2 )
        value = self.value( x ).view( shape ).transpose( 1, 2 )
        content = query @ key.transpose( -2, -1 )
        positions = __.torch.arange( frames, device = x.device )
        distances = positions.unsqueeze( 0 ) - positions.unsqueeze( 1 )
        indices = distances.clamp(
            -self.max_distance, self.max_distance ) + self.max_distance
        position = query @ self.relative_keys.weight.transpose( 0, 1 )
        position = __.torch.gather(
            position, -1,
            indices.expand( batch, self.heads, frames, frames ) )
        weights = __.torch.softmax(
            ( content + position ) * self.head_dim ** -0.5, dim = -1 )
        attended = self.dropout( weights ) @ value
        attended = attended.transpose( 1, 2 ).reshape(
            batch, frames, self.dim )
        return self.output( attended ), weights


class ConformerFeedForward( __.nn.Module ):
    ''' Pre-normalized feed-forward module with swish activation. '''

    def __init__( self, dim: int, expansion: int, dropout: float ) -> None:
        super( ).__init__( )
        self.norm = __.nn.LayerNorm( dim )
        self.expand = __.nn.Linear( dim, expansion * dim )
        self.activation = __.nn.SiLU( )
        self.dropout1 = __.nn.Dropout( dropout )
        self.contract = __.nn.Linear( expansion * dim, dim )
        self.dropout2 = __.nn.Dropout( dropout )

    def forward( self, x: __.FeatureMap ) -> __.FeatureMap:
        y = self.dropout1( self.activation( self.expand( self.norm( x ) ) ) )
        return self.dropout2( self.contract( y ) )


class ConformerConvolution( __.nn.Module ):
    ''' Pointwise expansion, depthwise convolution, pointwise contraction.

        The ``swish3x`` layout expands to ``expansion`` times the width with
        a swish activation; the ``glu2x`` layout expands to twice the width
        and gates back down to it.
    '''

    def __init__( # noqa: PLR0913
        self,
        dim: int,
        kernel_size: int,
        expansion: int,
        gating: ConvolutionGatings | str,
        dropout: float,
    ) -> None:
        super( ).__init__( )
        self.gating = ConvolutionGatings( gating )
        self.norm = __.nn.LayerNorm( dim )
        if self.gating is ConvolutionGatings.Glu:
            self.pointwise_in = __.nn.Conv1d( dim, 2 * dim, 1 )
            self.gate: __.nn.Module = __.nn.GLU( dim = 1 )
            inner = dim
        else:
            self.pointwise_in = __.nn.Conv1d( dim, expansion * dim, 1 )
            self.gate = __.nn.SiLU( )
            inner = expansion * dim
        self.depthwise_conv = __.nn.Conv1d(
            inner, inner, kernel_size,
            padding = kernel_size // 2, groups = inner )
        self.batch_norm = __.nn.BatchNorm1d( inner )
        self.activation = __.nn.SiLU( )
        self.pointwise_out = __.nn.Conv1d( inner, dim, 1 )
        self.dropout = __.nn.Dropout( dropout )

    def forward( self, x: __.FeatureMap ) -> __.FeatureMap:
        y = self.gate( self.pointwise_in( self.norm( x ).transpose( 1, 2 ) ) )
        y = self.activation( self.batch_norm( self.depthwise_conv( y ) ) )
        return self.dropout( self.pointwise_out( y ).transpose( 1, 2 ) )


class ConformerBlock( __.nn.Module ):
    ''' Half-step feed-forward, self-attention, convolution, half-step
        feed-forward, and final layer normalization, each sub-block with a
        residual connection.
    '''

    def __init__( self, dim: int, config: SeparatorConfig ) -> None:
        super( ).__init__( )
        self.dim = dim
        self.ffn1 = ConformerFeedForward(
            dim, config.ffn_expansion, config.dropout )
        self.attention_norm = __.nn.LayerNorm( dim )
        self.attention = RelativeSelfAttention(
            dim, config.heads, config.dropout, config.relative_distance )
        self.attention_dropout = __.nn.Dropout( config.dropout )
        self.convolution = ConformerConvolution(
            dim, config.conv_kernel, config.conv_expansion,
            config.conv_gating, config.dropout )
        self.ffn2 = ConformerFeedForward(
            dim, config.ffn_expansion, config.dropout )
        self.final_norm = __.nn.LayerNorm( dim )

    def forward( self, x: __.FeatureMap ) -> __.FeatureMap:
        if x.shape[ -1 ] != self.dim:
            raise _exceptions.DimensionMismatchError(
                'conformer block input', self.dim, x.shape[ -1 ] )
        x = x + 0.5 * self.ffn1( x )
        attended, _ = self.attention( self.attention_norm( x ) )
        x = x + self.attention_dropout( attended )
        x = x + self.convolution( x )
        x = x + 0.5 * self.ffn2( x )
        return self.final_norm( x )


class ExternalFeedForward( __.nn.Module ):
    ''' Dimension-halving feed-forward block between conformer blocks. '''

    def __init__(
        self,
        in_dim: int,
        dropout: float,
        hidden_dim: int | None = None,
    ) -> None:
        super( ).__init__( )
        self.in_dim, self.out_dim = in_dim, in_dim // 2
        hidden_dim = hidden_dim or in_dim
        self.layer1 = __.nn.Linear( in_dim, hidden_dim )
        self.activation = __.nn.SiLU( )
        self.dropout1 = __.nn.Dropout( dropout )
        self.layer2 = __.nn.Linear( hidden_dim, self.out_dim )
        self.dropout2 = __.nn.Dropout( dropout )

    def forward( self, x: __.FeatureMap ) -> __.FeatureMap:
        if x.shape[ -1 ] != self.in_dim:
            raise _exceptions.DimensionMismatchError(
                'external feed-forward input', self.in_dim, x.shape[ -1 ] )
        y = self.dropout1( self.activation( self.layer1( x ) ) )
        return self.dropout2( self.layer2( y ) )


class Separator( __.nn.Module, __.abc.ABC ):
    ''' Base for separator trunks conditioned on speaker embeddings. '''

    def __init__(
        self, config: SeparatorConfig, bottleneck_dim: int, embedding_dim: int
    ) -> None:
        super( ).__init__( )
        self.config = config
        self.bottleneck_dim = bottleneck_dim
        self.embedding_dim = embedding_dim
        self.stack_names: list[ str ] = [ ]

    def forward(
        self,
        features: __.typx.Annotated[
            __.FeatureMap,
            __.ddoc.Doc( ''' Bottleneck features [ batch, frames, dim ]. ''' ),
        ],
        embedding: __.SpeakerEmbedding,
    ) -> __.FeatureMap:
        if features.shape[ -1 ] != self.bottleneck_dim:
            raise _exceptions.DimensionMismatchError(
                'separator input', self.bottleneck_dim, features.shape[ -1 ] )
        if embedding.shape[ -1 ] != self.embedding_dim:
            raise _exceptions.DimensionMismatchError(
                'speaker embedding',
                self.embedding_dim, embedding.shape[ -1 ] )
        return self.run( features, embedding )

    @__.abc.abstractmethod
    def run(
        self, features: __.FeatureMap, embedding: __.SpeakerEmbedding
    ) -> __.FeatureMap:
        ''' Transforms validated inputs. '''
        raise NotImplementedError # pragma: no cover

    def iterate_stacks( self ) -> __.cabc.Iterator[ __.nn.Module ]:
        ''' Stacks in processing order. '''
        for name in self.stack_names: yield self.get_submodule( name )

    def _add_stack( self, stack: __.nn.Module ) -> None:
        name = f"stack{len( self.stack_names )}"
        self.add_module( name, stack )
        self.stack_names.append( name )

    def _require_model_dim( self ) -> int:
        model_dim = self.bottleneck_dim + self.embedding_dim
        if model_dim != self.config.model_dim:
            raise _exceptions.ConfigurationError(
                'separator',
                f"model_dim {self.config.model_dim} differs from bottleneck "
                f"plus embedding dimensions ({model_dim})" )
        return model_dim


class ConformerFfnSeparator( Separator ):
    ''' Stacks of conformer blocks followed by external feed-forward blocks.

        Every conformer block sees the previous stack output (or the
        bottleneck features) concatenated with the speaker embedding.
    '''

    def __init__(
        self, config: SeparatorConfig, bottleneck_dim: int, embedding_dim: int
    ) -> None:
        super( ).__init__( config, bottleneck_dim, embedding_dim )
        model_dim = self._require_model_dim( )
        if model_dim // 2 != bottleneck_dim or model_dim % 2:
            raise _exceptions.ConfigurationError(
                'separator',
                'conformer_ffn needs equal bottleneck and embedding '
                'dimensions, since the external feed-forward block halves '
                'its input' )
        for _ in range( config.stacks ):
            stack = __.nn.Module( )
            stack.add_module(
                'conformer', ConformerBlock( model_dim, config ) )
            stack.add_module(
                'ffn', ExternalFeedForward( model_dim, config.dropout ) )
            self._add_stack( stack )

    def run(
        self, features: __.FeatureMap, embedding: __.SpeakerEmbedding
    ) -> __.FeatureMap:
        for stack in self.iterate_stacks( ):
            conformed = stack.conformer(
                concat_embedding( features, embedding ) )
            features = stack.ffn( conformed )
        return features


class TcnConformerSeparator( Separator ):
    ''' Stacks of TCN blocks followed by conformer blocks.

        A pointwise projection after each conformer block returns to the
        bottleneck width, so each TCN block again receives bottleneck plus
        embedding channels.
    '''

    def __init__(
        self, config: SeparatorConfig, bottleneck_dim: int, embedding_dim: int
    ) -> None:
        super( ).__init__( config, bottleneck_dim, embedding_dim )
        model_dim = self._require_model_dim( )
        dilations = config.tcn_dilations
        for index in range( config.stacks ):
            stack = __.nn.Module( )
            stack.add_module( 'tcn', TcnBlock(
                model_dim, config.tcn_hidden, config.tcn_kernel,
                dilations[ index % len( dilations ) ] ) )
            stack.add_module(
                'conformer', ConformerBlock( model_dim, config ) )
            stack.add_module(
                'proj', __.nn.Linear( model_dim, bottleneck_dim ) )
            self._add_stack( stack )

    def run(
        self, features: __.FeatureMap, embedding: __.SpeakerEmbedding
    ) -> __.FeatureMap:
        for stack in self.iterate_stacks( ):
            y = stack.tcn( concat_embedding( features, embedding ) )
            features = stack.proj( stack.conformer( y ) )
        return features


class TcnBaselineSeparator( Separator ):
    ''' Stacks of TCN blocks with exponentially growing dilations.

        The first block of every stack receives the speaker embedding.
    '''

    def __init__(
        self, config: SeparatorConfig, bottleneck_dim: int, embedding_dim: int
    ) -> None:
        super( ).__init__( config, bottleneck_dim, embedding_dim )
        for _ in range( config.baseline_stacks ):
            stack = __.nn.Module( )
            stack.add_module( 'tcn', __.nn.ModuleList(
                TcnBlock(
                    bottleneck_dim, config.tcn_hidden, config.tcn_kernel,
                    dilation = 2 ** index,
                    embedding_dim = 0 if index else embedding_dim )
                for index in range( config.baseline_blocks ) ) )
            self._add_stack( stack )
        self.proj = __.nn.Linear( bottleneck_dim, bottleneck_dim )

    @property
    def dilations( self ) -> tuple[ int, ... ]:
        ''' Dilation of every block in processing order. '''
        return tuple(
            block.dilation
            for stack in self.iterate_stacks( ) for block in stack.tcn )

    def run(
        self, features: __.FeatureMap, embedding: __.SpeakerEmbedding
    ) -> __.FeatureMap:
        for stack in self.iterate_stacks( ):
            for index, block in enumerate( stack.tcn ):
                features = block( features, embedding if 0 == index else None )
        return self.proj( features )


class MaskHeads( __.nn.Module ):
    ''' Rectified pointwise mask estimators, one per encoder scale. '''

    def __init__( self, bottleneck_dim: int, channels_per_scale: int ) -> None:
        super( ).__init__( )
        self.bottleneck_dim = bottleneck_dim
        for scale in Scales:
            self.add_module(
                scale.value,
                __.nn.Linear( bottleneck_dim, channels_per_scale ) )

    def forward( self, features: __.FeatureMap ) -> MaskSet:
        if features.shape[ -1 ] != self.bottleneck_dim:
            raise _exceptions.DimensionMismatchError(
                'mask head input', self.bottleneck_dim, features.shape[ -1 ] )
        return MaskSet( *(
            __.torch.relu( self.get_submodule( scale.value )( features ) )
            for scale in Scales ) )


_SEPARATORS: __.cabc.Mapping[ Architectures, type[ Separator ] ] = (
    __.types.MappingProxyType( {
        Architectures.TcnBaseline: TcnBaselineSeparator,
        Architectures.ConformerFfn: ConformerFfnSeparator,
        Architectures.TcnConformer: TcnConformerSeparator,
    } ) )


def produce_separator(
    config: SeparatorConfig, bottleneck_dim: int, embedding_dim: int
) -> Separator:
    ''' Builds separator trunk named by configured architecture. '''
    class_ = _SEPARATORS[ Architectures( config.architecture ) ]
    return class_( config, bottleneck_dim, embedding_dim )
