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



''' Assert correct function of exception family. '''


import pytest

from .__ import PACKAGE_NAME, cache_import_module


def test_000_family_roots( ):
    ''' Errors derive from package roots and builtin categories. '''
    exceptions = cache_import_module( f"{PACKAGE_NAME}.exceptions" )
    assert issubclass( exceptions.Omnierror, exceptions.Omniexception )
    assert issubclass( exceptions.Omnierror, Exception )
    assert issubclass( exceptions.LabelRangeError, IndexError )
    assert issubclass( exceptions.NonFiniteLossError, ArithmeticError )
    assert issubclass( exceptions.ConfigurationError, ValueError )


@pytest.mark.parametrize(
    'class_name, arguments, fragment',
    (
        ( 'AudioFormatError', ( 'a.wav', '2 channels' ), "'a.wav'" ),
        ( 'SampleRateMismatchError', ( 16000, 8000, 'mixture' ), '8000 Hz' ),
        ( 'SilentSignalError', ( 'target', ), 'zero power' ),
        ( 'SignalLengthError', ( 'reference', 3, 'at least 40' ),
          'at least 40' ),
        ( 'SplitOverlapError', ( { 'b', 'a' }, ), 'a, b' ),
        ( 'ConfigurationError', ( 'separator', 'bad' ), '[separator]' ),
        ( 'DimensionMismatchError', ( 'input', 512, 256 ), 'expected 512' ),
        ( 'LabelRangeError', ( 5, 4 ), '[0, 4)' ),
        ( 'NonFiniteLossError', ( 17, 'dump.npz' ), 'step 17' ),
        ( 'CheckpointError', ( 'model.ckpt', 'truncated' ), 'truncated' ),
    )
)
def test_100_messages( class_name, arguments, fragment ):
    ''' Errors describe their circumstances. '''
    exceptions = cache_import_module( f"{PACKAGE_NAME}.exceptions" )
    error = getattr( exceptions, class_name )( *arguments )
    assert isinstance( error, exceptions.Omnierror )
    assert fragment in str( error )


def test_110_chaining( ):
    ''' Errors accept causes when raised from other exceptions. '''
    exceptions = cache_import_module( f"{PACKAGE_NAME}.exceptions" )
    with pytest.raises( exceptions.ManifestError ) as info:
        try: raise KeyError( 'seed' )
        except KeyError as exception:
            raise exceptions.ManifestError(
                'train.jsonl', 'header lacks seed' ) from exception
    assert isinstance( info.value.__cause__, KeyError )
