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



''' Family of exceptions for package API. '''


from . import __


class Omniexception( BaseException, __.ccstd.Object ):
    ''' Base for all exceptions raised by package API. '''

    _attribute_visibility_includes_: __.cabc.Collection[ str ] = (
        frozenset( ( '__cause__', '__context__', ) ) )


class Omnierror( Omniexception, Exception ):
    ''' Base for error exceptions raised by package API. '''


class AudioFormatError( Omnierror, ValueError ):
    ''' Audio file cannot be read or has unsupported layout. '''

    def __init__( self, location: __.PathLike, reason: str ) -> None:
        super( ).__init__(
            f"Unsupported audio at {str( location )!r}: {reason}" )


class SampleRateMismatchError( Omnierror, ValueError ):
    ''' Sample rate differs from the expected rate. '''

    def __init__( self, expected: int, actual: int, subject: str ) -> None:
        super( ).__init__(
            f"Sample rate of {subject} is {actual} Hz; "
            f"expected {expected} Hz." )


class SilentSignalError( Omnierror, ValueError ):
    ''' Signal has zero power where power is required. '''

    def __init__( self, subject: str ) -> None:
        super( ).__init__( f"Signal {subject!r} has zero power." )


class SignalLengthError( Omnierror, ValueError ):
    ''' Signal length is invalid for the requested operation. '''

    def __init__( self, subject: str, length: int, requirement: str ) -> None:
        super( ).__init__(
            f"Signal {subject!r} has {length} samples; "
            f"requires {requirement}." )


class SpeakerIdentityError( Omnierror, ValueError ):
    ''' Speaker identities are inconsistent for a mixture. '''

    def __init__( self, reason: str ) -> None:
        super( ).__init__( f"Invalid speaker assignment: {reason}" )


class CorpusInsufficiencyError( Omnierror, ValueError ):
    ''' Speech corpus cannot satisfy simulation request. '''

    def __init__( self, reason: str ) -> None:
        super( ).__init__( f"Insufficient corpus: {reason}" )


class SplitOverlapError( Omnierror, ValueError ):
    ''' Speakers shared between evaluation and training splits. '''

    def __init__( self, speakers: __.cabc.Collection[ str ] ) -> None:
        names = ', '.join( sorted( speakers ) )
        super( ).__init__(
            f"Speakers appear in both test and training splits: {names}" )


class ManifestError( Omnierror, ValueError ):
    ''' Corpus manifest is malformed or unresolvable. '''

    def __init__( self, location: __.PathLike, reason: str ) -> None:
        super( ).__init__(
            f"Invalid manifest {str( location )!r}: {reason}" )


class ConfigurationError( Omnierror, ValueError ):
    ''' Configuration is invalid or inconsistent. '''

    def __init__( self, section: str, reason: str ) -> None:
        super( ).__init__( f"Invalid configuration [{section}]: {reason}" )


class DimensionMismatchError( Omnierror, ValueError ):
    ''' Tensor dimension does not match block configuration. '''

    def __init__( self, subject: str, expected: int, actual: int ) -> None:
        super( ).__init__(
            f"Dimension of {subject} is {actual}; expected {expected}." )


class LabelRangeError( Omnierror, IndexError ):
    ''' Class label lies outside of the valid range. '''

    def __init__( self, label: int, classes_count: int ) -> None:
        super( ).__init__(
            f"Label {label} is outside of [0, {classes_count})." )


class NonFiniteLossError( Omnierror, ArithmeticError ):
    ''' Training loss is not finite. '''

    def __init__( self, step: int, dump_location: __.PathLike ) -> None:
        super( ).__init__(
            f"Non-finite loss at step {step}. "
            f"Offending batch written to {str( dump_location )!r}." )


class CheckpointError( Omnierror, ValueError ):
    ''' Checkpoint archive is unreadable or incompatible. '''

    def __init__( self, location: __.PathLike, reason: str ) -> None:
        super( ).__init__(
            f"Invalid checkpoint {str( location )!r}: {reason}" )
