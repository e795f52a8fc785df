import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    // the end-to-end suite boots the Python service, which needs a moment
    testTimeout: 30000,
    hookTimeout: 30000,
  },
});
