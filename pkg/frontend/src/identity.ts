/**
 * In-browser keypair identity. Keys are generated locally with
 * WebCrypto Ed25519 and never leave the client; the server sees only
 * the raw public key and signatures. The address is the last 20 bytes
 * of SHA-256 over the raw public key, matching the server's derivation.
 */

import { bytesToHex } from "./canonical.js";

const ALGORITHM = "Ed25519";
const STORAGE_KEY = "agora.identity.v1";

export interface StoredIdentity {
  publicJwk: JsonWebKey;
  privateJwk: JsonWebKey;
}

export interface ClientIdentity {
  keys: CryptoKeyPair;
  publicKeyRaw: Uint8Array;
  publicKeyHex: string;
  address: string;
}

export async function generateKeypair(): Promise<CryptoKeyPair> {
  return (await crypto.subtle.generateKey(ALGORITHM, true, [
    "sign",
    "verify",
  ])) as CryptoKeyPair;
}

export async function exportPublicKeyRaw(keys: CryptoKeyPair): Promise<Uint8Array> {
  return new Uint8Array(await crypto.subtle.exportKey("raw", keys.publicKey));
}

export async function deriveAddress(publicKeyRaw: Uint8Array): Promise<string> {
  if (publicKeyRaw.length !== 32) throw new Error("raw Ed25519 public key must be 32 bytes");
  const digest = new Uint8Array(
    await crypto.subtle.digest("SHA-256", publicKeyRaw as BufferSource),
  );
  return "0x" + bytesToHex(digest.slice(-20));
}

export async function toClientIdentity(keys: CryptoKeyPair): Promise<ClientIdentity> {
  const publicKeyRaw = await exportPublicKeyRaw(keys);
  return {
    keys,
    publicKeyRaw,
    publicKeyHex: bytesToHex(publicKeyRaw),
    address: await deriveAddress(publicKeyRaw),
  };
}

export async function sign(keys: CryptoKeyPair, payload: Uint8Array): Promise<Uint8Array> {
  const signature = await crypto.subtle.sign(
    ALGORITHM,
    keys.privateKey,
    payload as BufferSource,
  );
  return new Uint8Array(signature);
}

export async function verify(
  publicKeyRaw: Uint8Array,
  signature: Uint8Array,
  payload: Uint8Array,
): Promise<boolean> {
  try {
    const key = await crypto.subtle.importKey(
      "raw",
      publicKeyRaw as BufferSource,
      ALGORITHM,
      true,
      ["verify"],
    );
    return await crypto.subtle.verify(
      ALGORITHM,
      key,
      signature as BufferSource,
      payload as BufferSource,
    );
  } catch {
    return false;
  }
}

/** Persist the keypair for the study session (browser localStorage). */
export async function saveIdentity(keys: CryptoKeyPair, storage: Storage): Promise<void> {
  const stored: StoredIdentity = {
    publicJwk: await crypto.subtle.exportKey("jwk", keys.publicKey),
    privateJwk: await crypto.subtle.exportKey("jwk", keys.privateKey),
  };
  storage.setItem(STORAGE_KEY, JSON.stringify(stored));
}

export async function loadIdentity(storage: Storage): Promise<CryptoKeyPair | null> {
  const raw = storage.getItem(STORAGE_KEY);
  if (!raw) return null;
  try {
    const stored = JSON.parse(raw) as StoredIdentity;
    const publicKey = await crypto.subtle.importKey(
      "jwk", stored.publicJwk, ALGORITHM, true, ["verify"],
    );
    const privateKey = await crypto.subtle.importKey(
      "jwk", stored.privateJwk, ALGORITHM, true, ["sign"],
    );
    return { publicKey, privateKey };
  } catch {
    return null;
  }
}
