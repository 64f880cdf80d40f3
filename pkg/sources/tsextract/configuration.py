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



''' Loading, validation, and digests of configuration records. '''


from __future__ import annotations

from . import __
from . import exceptions as _exceptions


_Record = __.typx.TypeVar( '_Record' )


def load_document(
    location: __.typx.Annotated[
        __.PathLike, __.ddoc.Doc( ''' Path to TOML configuration file. ''' )
    ],
) -> __.cabc.Mapping[ str, __.typx.Any ]:
    ''' Loads TOML configuration document. '''
    path = __.Path( location )
    try:
        with path.open( 'rb' ) as stream:
            return __.tomllib.load( stream )
    except OSError as exception:
        raise _exceptions.ConfigurationError(
            str( path ), f"cannot read file ({exception})" ) from exception
    except __.tomllib.TOMLDecodeError as exception:
        raise _exceptions.ConfigurationError(
            str( path ), f"malformed TOML ({exception})" ) from exception


def produce_record(
    class_: type[ _Record ],
    mapping: __.typx.Annotated[
        __.cabc.Mapping[ str, __.typx.Any ],
        __.ddoc.Doc( ''' Values to override defaults of the record. ''' ),
    ],
    section: __.typx.Annotated[
        str, __.ddoc.Doc( ''' Section name for error reports. ''' )
    ],
) -> _Record:
    ''' Produces configuration record from mapping, rejecting unknown keys.

        Sequences are converted to tuples, recursively, so that records
        stay hashable and comparable.
    '''
    names = { field.name for field in _survey_fields( class_ ) }
    unknown = set( mapping ) - names
    if unknown:
        raise _exceptions.ConfigurationError(
            section, f"unknown keys: {', '.join( sorted( unknown ) )}" )
    arguments = {
        name: _freeze_value( value ) for name, value in mapping.items( ) }
    try: return class_( **arguments )
    except TypeError as exception:
        raise _exceptions.ConfigurationError(
            section, str( exception ) ) from exception


def record_to_mapping( record: object ) -> dict[ str, __.typx.Any ]:
    ''' Converts configuration record into plain, JSON-ready mapping. '''
    return {
        field.name: _thaw_value( getattr( record, field.name ) )
        for field in _survey_fields( record ) }


def calculate_digest( mapping: __.cabc.Mapping[ str, __.typx.Any ] ) -> str:
    ''' Calculates short content digest of mapping via canonical JSON. '''
    text = __.json.dumps(
        mapping, sort_keys = True, separators = ( ',', ':' ) )
    return __.hashlib.sha256( text.encode( ) ).hexdigest( )[ : 16 ]


def _freeze_value( value: __.typx.Any ) -> __.typx.Any:
    if isinstance( value, list | tuple ):
        return tuple( # pyright: ignore
            _freeze_value( item ) for item in value )
    if isinstance( value, __.cabc.Mapping ):
        return __.types.MappingProxyType( {
            key: _freeze_value( item )
            for key, item in value.items( ) } ) # pyright: ignore
    return value


def _survey_fields(
    record: object
) -> tuple[ __.dcls.Field[ __.typx.Any ], ... ]:
    # Base classes may add private bookkeeping fields.
    return tuple(
        field for field in __.dcls.fields( record ) # pyright: ignore
        if not field.name.startswith( '_' ) )


def _thaw_value( value: __.typx.Any ) -> __.typx.Any:
    if __.dcls.is_dataclass( value ): return record_to_mapping( value )
    if isinstance( value, list | tuple ):
        return [ _thaw_value( item ) for item in value ] # pyright: ignore
    if isinstance( value, __.cabc.Mapping ):
        return {
            key: _thaw_value( item )
            for key, item in value.items( ) } # pyright: ignore
    return value
