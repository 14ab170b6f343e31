/**
 * Ballot construction and signing. The signed bytes follow the server's
 * documented schema exactly (see the shared golden fixtures): an object
 * with keys allocation, cast_at, proposal_id, voter in canonical form.
 */

import { bytesToHex, canonicalBytes } from "./canonical.js";
import { ClientIdentity, sign } from "./identity.js";

export interface VoteWireBody {
  proposal_id: string;
  voter: string;
  allocation: number[];
  cast_at: number;
  public_key: string;
  signature: string;
}

export function ballotSigningPayload(
  proposalId: string,
  voter: string,
  allocation: number[],
  castAt: number,
): Uint8Array {
  return canonicalBytes({
    allocation,
    cast_at: castAt,
    proposal_id: proposalId,
    voter,
  });
}

export async function buildSignedVote(
  identity: ClientIdentity,
  proposalId: string,
  allocation: number[],
  castAt: number,
): Promise<VoteWireBody> {
  const payload = ballotSigningPayload(proposalId, identity.address, allocation, castAt);
  const signature = await sign(identity.keys, payload);
  return {
    proposal_id: proposalId,
    voter: identity.address,
    allocation: [...allocation],
    cast_at: castAt,
    public_key: identity.publicKeyHex,
    signature: bytesToHex(signature),
  };
}
