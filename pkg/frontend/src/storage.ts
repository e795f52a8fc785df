/** Session id persistence. localStorage can throw in private mode. */

const SESSION_KEY = "tutorkit.session_id";

export interface SessionStorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

export function loadSessionId(store: SessionStorageLike): string | null {
  try {
    return store.getItem(SESSION_KEY);
  } catch {
    return null;
  }
}

export function saveSessionId(store: SessionStorageLike, id: string): void {
  try {
    store.setItem(SESSION_KEY, id);
  } catch {
    // storage unavailable; the session just will not survive a reload
  }
}

export function clearSessionId(store: SessionStorageLike): void {
  try {
    store.removeItem(SESSION_KEY);
  } catch {
    // ignore
  }
}

/** In-memory stand-in used by tests and as a fallback. */
export function memoryStorage(): SessionStorageLike {
  const data = new Map<string, string>();
  return {
    getItem: (key) => data.get(key) ?? null,
    setItem: (key, value) => {
      data.set(key, value);
    },
    removeItem: (key) => {
      data.delete(key);
    },
  };
}
